//! Dance-beat navigator: autoregressive multi-dancer trajectory generation
//! from music features.
//!
//! Music frames pass through a music MLP, dancer coordinates through a
//! stacked LSTM with identity and temporal positional encodings, and stacked
//! causal trajectory-attention blocks let each music-side query look at past
//! position features only. An MLP decoder emits the next coordinates per
//! dancer. Training is teacher-forced with a reconstruction, velocity, and
//! distance-consistency objective; inference rolls out freely and optionally
//! smooths each coordinate channel with a Savitzky–Golay filter.

mod loss;
mod model;
mod savgol;
mod train;

pub use loss::{loss_dbn, loss_distcon, DbnLossBreakdown, DbnLossWeights};
pub use model::{DbnConfig, DbnModel};
pub use savgol::savgol_smooth;
pub use train::{train_dbn, DbnTrainConfig, EpochStats, TrainError};

use thiserror::Error;

/// Per-dancer root trajectories at a fixed frame rate: `positions[c][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySequence {
    positions: Vec<Vec<[f64; 3]>>,
    pub fps: f64,
}

impl TrajectorySequence {
    pub fn new(positions: Vec<Vec<[f64; 3]>>, fps: f64) -> Result<Self, DbnError> {
        if positions.is_empty() || positions[0].is_empty() {
            return Err(DbnError::Shape("need at least one dancer and one frame".into()));
        }
        let l = positions[0].len();
        for (c, d) in positions.iter().enumerate() {
            if d.len() != l {
                return Err(DbnError::Shape(format!(
                    "dancer {c} has {} frames, expected {l}",
                    d.len()
                )));
            }
            for (f, p) in d.iter().enumerate() {
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(DbnError::Shape(format!("non-finite position at dancer {c} frame {f}")));
                }
            }
        }
        Ok(TrajectorySequence { positions, fps })
    }

    pub fn dancers(&self) -> usize {
        self.positions.len()
    }

    pub fn frames(&self) -> usize {
        self.positions[0].len()
    }

    pub fn position(&self, dancer: usize, frame: usize) -> [f64; 3] {
        self.positions[dancer][frame]
    }

    pub fn dancer(&self, dancer: usize) -> &[[f64; 3]] {
        &self.positions[dancer]
    }

    pub fn positions(&self) -> &[Vec<[f64; 3]>] {
        &self.positions
    }

    /// Positions of every dancer at one frame.
    pub fn frame(&self, frame: usize) -> Vec<[f64; 3]> {
        self.positions.iter().map(|d| d[frame]).collect()
    }

    /// Smallest ground-plane (x, z) distance between any dancer pair at any
    /// frame. `None` for a single dancer.
    pub fn min_pair_distance(&self) -> Option<f64> {
        let c = self.dancers();
        if c < 2 {
            return None;
        }
        let mut min = f64::INFINITY;
        for f in 0..self.frames() {
            for i in 0..c {
                for j in i + 1..c {
                    let a = self.positions[i][f];
                    let b = self.positions[j][f];
                    let dx = a[0] - b[0];
                    let dz = a[2] - b[2];
                    min = min.min((dx * dx + dz * dz).sqrt());
                }
            }
        }
        Some(min)
    }
}

/// Errors from the navigator.
#[derive(Debug, Error)]
pub enum DbnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("too many dancers: {got} exceeds the configured maximum {max}")]
    TooManyDancers { got: usize, max: usize },
    #[error("sequence length {got} exceeds the configured maximum {max}")]
    TooLong { got: usize, max: usize },
    #[error("distance-consistency loss needs at least two dancers")]
    NeedsPair,
    #[error("invalid filter parameters: {0}")]
    InvalidFilter(String),
    #[error("need at least {0} frames")]
    TooShort(usize),
}
