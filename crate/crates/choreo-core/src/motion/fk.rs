use super::frame::{MotionFrame, CONTACT_DIM};
use super::rot6d::{mat3_apply, mat3_mul, rot6d_to_matrix, MAT3_IDENTITY};
use super::skeleton::Skeleton;
use super::MotionError;

/// Default contact height threshold, meters.
pub const CONTACT_HEIGHT_THRESH: f64 = 0.08;
/// Default contact speed threshold, meters/second.
pub const CONTACT_SPEED_THRESH: f64 = 0.2;

/// World-space joint positions from a 6D pose and a root position.
///
/// Joint 0 sits at `root`; every other joint sits at its parent's position
/// plus the accumulated parent rotation applied to its rest offset.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    pose: &[f64],
    root: &[f64; 3],
) -> Result<Vec<[f64; 3]>, MotionError> {
    let n = skeleton.joints();
    if pose.len() != 6 * n {
        return Err(MotionError::Dimension { expected: 6 * n, got: pose.len() });
    }
    // Accumulate positions relative to the origin, then add the root as a
    // single final translation. That factorization keeps translation
    // equivariance bit-exact: FK(d, t) == FK(d, 0) + t.
    let mut acc = vec![MAT3_IDENTITY; n];
    let mut rel = vec![[0.0; 3]; n];
    acc[0] = rot6d_to_matrix(&pose[0..6])?;
    for j in 1..n {
        let parent = skeleton.parent(j).expect("non-root joint has a parent");
        let local = rot6d_to_matrix(&pose[6 * j..6 * j + 6])?;
        let off = skeleton.offset(j);
        let rotated = mat3_apply(&acc[parent], &off);
        rel[j] = [
            rel[parent][0] + rotated[0],
            rel[parent][1] + rotated[1],
            rel[parent][2] + rotated[2],
        ];
        acc[j] = mat3_mul(&acc[parent], &local);
    }
    Ok(rel
        .into_iter()
        .map(|r| [r[0] + root[0], r[1] + root[1], r[2] + root[2]])
        .collect())
}

/// Joint positions for every frame of one dancer.
pub fn fk_sequence(
    skeleton: &Skeleton,
    frames: &[MotionFrame],
) -> Result<Vec<Vec<[f64; 3]>>, MotionError> {
    frames
        .iter()
        .map(|f| forward_kinematics(skeleton, &f.pose, &f.root))
        .collect()
}

/// Backward-difference joint velocities in m/s; `v[0]` copies `v[1]` so no
/// spurious zero appears at the first frame.
pub fn joint_velocities(positions: &[Vec<[f64; 3]>], fps: f64) -> Result<Vec<Vec<[f64; 3]>>, MotionError> {
    let frames = positions.len();
    if frames < 2 {
        return Err(MotionError::TooFewFrames { need: 2, got: frames });
    }
    let joints = positions[0].len();
    let mut vel = vec![vec![[0.0; 3]; joints]; frames];
    for i in 1..frames {
        if positions[i].len() != joints {
            return Err(MotionError::ShapeMismatch("jagged position array".into()));
        }
        for j in 0..joints {
            for k in 0..3 {
                vel[i][j][k] = (positions[i][j][k] - positions[i - 1][j][k]) * fps;
            }
        }
    }
    vel[0] = vel[1].clone();
    Ok(vel)
}

/// Threshold rule on foot joints: the label is 1 iff the joint is both low
/// (height below `height_thresh`) and slow (speed below `speed_thresh`).
pub fn compute_contact_labels(
    positions: &[Vec<[f64; 3]>],
    skeleton: &Skeleton,
    fps: f64,
    height_thresh: f64,
    speed_thresh: f64,
) -> Result<Vec<[f64; CONTACT_DIM]>, MotionError> {
    let vel = joint_velocities(positions, fps)?;
    let feet = skeleton.foot_joints();
    if feet.len() != CONTACT_DIM {
        return Err(MotionError::InvalidSkeleton(format!(
            "expected {CONTACT_DIM} foot joints, skeleton has {}",
            feet.len()
        )));
    }
    let mut labels = vec![[0.0; CONTACT_DIM]; positions.len()];
    for (i, label) in labels.iter_mut().enumerate() {
        for (slot, &j) in feet.iter().enumerate() {
            let height = positions[i][j][1];
            let v = vel[i][j];
            let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            label[slot] = if height < height_thresh && speed < speed_thresh {
                1.0
            } else {
                0.0
            };
        }
    }
    Ok(labels)
}

/// Merge adapted footwork into raw motion, frame by frame: lower-body pose
/// channels and contact labels come from `adapted`, every other pose channel
/// and the root come from `raw`.
pub fn merge_footwork_frame(raw: &MotionFrame, adapted: &MotionFrame, skeleton: &Skeleton) -> MotionFrame {
    let mut out = raw.clone();
    out.contact = adapted.contact;
    for &j in skeleton.lower_body() {
        out.pose[6 * j..6 * j + 6].copy_from_slice(&adapted.pose[6 * j..6 * j + 6]);
    }
    out
}

/// Sequence version of [`merge_footwork_frame`].
pub fn merge_footwork(
    raw: &[MotionFrame],
    adapted: &[MotionFrame],
    skeleton: &Skeleton,
) -> Result<Vec<MotionFrame>, MotionError> {
    if raw.len() != adapted.len() {
        return Err(MotionError::ShapeMismatch(format!(
            "raw has {} frames, adapted has {}",
            raw.len(),
            adapted.len()
        )));
    }
    Ok(raw
        .iter()
        .zip(adapted.iter())
        .map(|(r, a)| merge_footwork_frame(r, a, skeleton))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::rot6d::{matrix_to_rot6d, rot_x};
    use rand::{Rng, SeedableRng};

    fn chain3() -> Skeleton {
        // 3 joints in a vertical chain with unit bones
        Skeleton::new(
            vec![None, Some(0), Some(1)],
            vec![[0.0; 3], [0.0, -1.0, 0.0], [0.0, -1.0, 0.0]],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn identity_pose(joints: usize) -> Vec<f64> {
        let mut pose = vec![0.0; 6 * joints];
        for j in 0..joints {
            pose[6 * j] = 1.0;
            pose[6 * j + 4] = 1.0;
        }
        pose
    }

    #[test]
    fn rest_pose_positions_sum_offsets() {
        let skel = Skeleton::canonical();
        let pose = identity_pose(24);
        let pos = forward_kinematics(&skel, &pose, &[0.0; 3]).unwrap();
        for j in 0..24 {
            let rest = skel.rest_position(j);
            for k in 0..3 {
                assert!((pos[j][k] - rest[k]).abs() < 1e-12, "joint {j}");
            }
        }
    }

    #[test]
    fn translation_equivariance_is_exact() {
        let skel = Skeleton::canonical();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut pose = identity_pose(24);
        for v in pose.iter_mut() {
            *v += rng.gen::<f64>() * 0.3;
        }
        let t = [1.25, -0.5, 3.75];
        let base = forward_kinematics(&skel, &pose, &[0.0; 3]).unwrap();
        let moved = forward_kinematics(&skel, &pose, &t).unwrap();
        for j in 0..24 {
            for k in 0..3 {
                assert_eq!(moved[j][k], base[j][k] + t[k]);
            }
        }
    }

    #[test]
    fn single_joint_rotation_rotates_child_bone() {
        // rotate joint 1 by 90° about x: bone 1->2 swings from (0,-1,0) to (0,0,-1)...
        // hand computation: R_x(90°)·(0,-1,0) = (0, 0, -1)
        let skel = chain3();
        let mut pose = identity_pose(3);
        let r = matrix_to_rot6d(&rot_x(std::f64::consts::FRAC_PI_2)).unwrap();
        pose[6..12].copy_from_slice(&r);
        let pos = forward_kinematics(&skel, &pose, &[0.0; 3]).unwrap();
        // joint 1 at rest offset
        assert!((pos[1][1] + 1.0).abs() < 1e-12);
        // joint 2 = joint1 + R_x(90°)·(0,-1,0) = (0,-1,0) + (0,0,-1)
        assert!((pos[2][0]).abs() < 1e-12);
        assert!((pos[2][1] + 1.0).abs() < 1e-12);
        assert!((pos[2][2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn velocities_of_static_sequence_are_zero() {
        let skel = Skeleton::canonical();
        let pose = identity_pose(24);
        let pos = forward_kinematics(&skel, &pose, &[0.0; 3]).unwrap();
        let seq = vec![pos.clone(), pos.clone(), pos];
        let vel = joint_velocities(&seq, 30.0).unwrap();
        assert!(vel.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_translation_velocity() {
        let skel = Skeleton::canonical();
        let pose = identity_pose(24);
        let mut seq = Vec::new();
        for i in 0..5 {
            let root = [0.1 * i as f64, 0.0, 0.0];
            seq.push(forward_kinematics(&skel, &pose, &root).unwrap());
        }
        let vel = joint_velocities(&seq, 30.0).unwrap();
        for frame in &vel {
            for v in frame {
                assert!((v[0] - 3.0).abs() < 1e-9);
                assert!(v[1].abs() < 1e-9 && v[2].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn velocity_is_local_to_moving_joint() {
        let mut a = vec![[0.0; 3]; 4];
        let mut b = vec![[0.0; 3]; 4];
        b[2] = [0.0, 0.5, 0.0];
        a[3] = [1.0, 1.0, 1.0];
        b[3] = [1.0, 1.0, 1.0];
        let vel = joint_velocities(&[a, b], 10.0).unwrap();
        assert_eq!(vel[1][0], [0.0; 3]);
        assert_eq!(vel[1][1], [0.0; 3]);
        assert_eq!(vel[1][2], [0.0, 5.0, 0.0]);
        assert_eq!(vel[1][3], [0.0; 3]);
    }

    #[test]
    fn too_few_frames_is_error() {
        assert!(joint_velocities(&[vec![[0.0; 3]; 2]], 30.0).is_err());
    }

    #[test]
    fn contact_labels_threshold_rule() {
        let skel = Skeleton::canonical();
        // planted: all feet at ground level, static
        let mut planted = vec![vec![[0.0; 3]; 24]; 3];
        for frame in planted.iter_mut() {
            for &j in skel.foot_joints() {
                frame[j] = [0.0, 0.02, 0.0];
            }
        }
        let labels = compute_contact_labels(&planted, &skel, 30.0, CONTACT_HEIGHT_THRESH, CONTACT_SPEED_THRESH).unwrap();
        assert!(labels.iter().all(|l| l.iter().all(|v| *v == 1.0)));

        // high foot: label 0 regardless of speed
        let mut high = planted.clone();
        for frame in high.iter_mut() {
            frame[skel.foot_joints()[0]] = [0.0, 1.0, 0.0];
        }
        let labels = compute_contact_labels(&high, &skel, 30.0, CONTACT_HEIGHT_THRESH, CONTACT_SPEED_THRESH).unwrap();
        assert!(labels.iter().all(|l| l[0] == 0.0 && l[1] == 1.0));
    }

    #[test]
    fn merge_footwork_partitions_channels() {
        let skel = Skeleton::canonical();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let mut raw = MotionFrame::identity_pose();
        let mut adapted = MotionFrame::identity_pose();
        for v in raw.pose.iter_mut() {
            *v = rng.gen();
        }
        for v in adapted.pose.iter_mut() {
            *v = rng.gen();
        }
        raw.contact = [0.0, 0.0, 1.0, 1.0];
        adapted.contact = [1.0, 1.0, 0.0, 0.0];
        raw.root = [1.0, 2.0, 3.0];
        adapted.root = [9.0, 9.0, 9.0];
        let merged = merge_footwork_frame(&raw, &adapted, &skel);
        assert_eq!(merged.contact, adapted.contact);
        assert_eq!(merged.root, raw.root);
        for j in 0..24 {
            let src = if skel.is_lower_body(j) { &adapted } else { &raw };
            assert_eq!(merged.joint_rot6d(j), src.joint_rot6d(j), "joint {j}");
        }
        // idempotent when both inputs agree
        let same = merge_footwork_frame(&raw, &raw, &skel);
        assert_eq!(same, raw);
    }

    #[test]
    fn merge_footwork_shape_mismatch_errors() {
        let skel = Skeleton::canonical();
        let a = vec![MotionFrame::identity_pose(); 2];
        let b = vec![MotionFrame::identity_pose(); 3];
        assert!(merge_footwork(&a, &b, &skel).is_err());
    }
}
