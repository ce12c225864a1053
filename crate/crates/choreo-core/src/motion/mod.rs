//! Motion representation, 6D-rotation algebra, forward kinematics, and the
//! upper/lower body split used when merging adapted footwork.
//!
//! A dancer frame packs into 151 values as `[contact(4), root(3), pose(144)]`
//! with the pose holding 24 joints in 6D rotation format (first two rotation
//! matrix columns per joint). All operations here are pure functions.

mod fk;
mod frame;
mod rot6d;
mod skeleton;

pub use fk::{
    compute_contact_labels, fk_sequence, forward_kinematics, joint_velocities, merge_footwork,
    merge_footwork_frame, CONTACT_HEIGHT_THRESH, CONTACT_SPEED_THRESH,
};
pub use frame::{
    GroupMotionSequence, MotionFrame, CONTACT_DIM, FRAME_DIM, JOINT_COUNT, POSE_DIM, ROOT_DIM,
};
pub use rot6d::{matrix_to_rot6d, rot6d_to_matrix, rot_x, rot_y, rot_z};
pub use skeleton::Skeleton;

use thiserror::Error;

/// Errors from motion representation and kinematics.
#[derive(Debug, Error)]
pub enum MotionError {
    #[error("dimension error: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("degenerate rotation: {0}")]
    DegenerateRotation(String),
    #[error("matrix is not orthonormal within tolerance (deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
}
