//! Trajectory-conditioned diffusion over group motion.
//!
//! The forward process never corrupts the three root channels: they carry
//! the conditioning trajectory bitwise at every step, during training and
//! sampling alike. The denoiser predicts the clean sample directly: a
//! fusion projection folds all dancers of a frame into one group vector,
//! stacked decoder blocks attend over time and to the music, and a footwork
//! adaptor gated by trajectory offsets corrects the lower body, which is
//! merged over the raw decoder output.

mod fk;
mod loss;
mod model;
mod noising;
mod sampler;
mod schedule;
mod train;

pub use loss::{
    loss_rfk, loss_tcdiff, raw_contacts, thresholded_contacts, TcdiffLossBreakdown,
    TcdiffLossWeights,
};
pub use model::{TcdiffConfig, TcdiffModel};
pub use noising::{draw_noise, q_sample_conditional, TrajectoryOffsets, NOISED_DIM};
pub use sampler::{sample, sample_with, SamplerOptions};
pub use schedule::{DiffusionSchedule, ScheduleKind};
pub use train::{train_tcdiff, TcdiffEpochStats, TcdiffTrainConfig, TcdiffTrainError};

use thiserror::Error;

/// Errors from the diffusion stage.
#[derive(Debug, Error)]
pub enum TcdiffError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model was built for {expected} dancers, got {got}")]
    DancerMismatch { got: usize, expected: usize },
}
