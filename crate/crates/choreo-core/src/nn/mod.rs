//! Minimal reverse-mode autodiff and the layers the choreography models need.
//!
//! The centerpiece is [`Tape`]: operations executed through it record their
//! inputs and a backward rule; [`Tape::backward`] then walks the recording in
//! reverse topological order exactly once and accumulates gradients. Values
//! are dense `f64` tensors ([`Tensor`]). A tape is single-threaded; separate
//! tapes may live on separate threads.
//!
//! On top of the tape sit the building blocks: [`Dense`], [`LstmCell`] /
//! [`Lstm`], multi-head [`Attention`] with an optional causal mask,
//! [`ConcatSquash`] gating layers, the [`Adam`] optimizer, and a
//! finite-difference [`grad_check`] harness used by the test suite and the
//! `gradcheck` CLI command.

mod adam;
mod gradcheck;
mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{
    sinusoidal_embedding, sinusoidal_table, Activation, Attention, ConcatSquash, Dense, Lstm,
    LstmCell, Mlp, RmsNorm,
};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, Session, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors from tensor construction and tape operations.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}
