//! Music-driven group choreography toolkit.
//!
//! Two-stage pipeline: a beat-aware trajectory navigator ([`dbn`]) turns music
//! features into non-overlapping per-dancer root trajectories, and a
//! trajectory-conditioned diffusion model ([`diffusion`]) fills in full-body
//! motion that follows those trajectories exactly. Around the two models sit
//! the motion representation and kinematics ([`motion`]), the 35-dim music
//! feature extractor ([`audio`]), the reverse-mode autodiff kit used to train
//! everything on CPU ([`nn`]), the evaluation metric suite ([`metrics`]), a
//! synthetic choreography generator that produces labelled desk-scale data
//! ([`synth`]), and binary file formats ([`io`]).
//!
//! All numerics are `f64` and deterministic: the same seed yields
//! bit-identical training curves, samples, and output files.

pub mod audio;
pub mod dbn;
pub mod diffusion;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod synth;

pub use motion::{GroupMotionSequence, MotionFrame, Skeleton};
pub use audio::{AudioClip, MusicFeatureSequence};
