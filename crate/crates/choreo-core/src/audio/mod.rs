//! Audio parsing and the 35-dimensional per-frame music feature:
//! `[envelope(1), mfcc(20), chroma(12), peak(1), beat(1)]`.
//!
//! The pipeline is a Hann-window STFT whose hop is chosen so the feature
//! rate equals the motion frame rate, followed by a mel filterbank for the
//! onset envelope and MFCCs, pitch-class folding for chroma, and a
//! constant-tempo grid search for beats. Everything is deterministic: the
//! same bytes always produce the same features.

mod features;
mod stft;
mod wav;

pub use features::{
    chroma, detect_peaks_beats, extract_features, mfcc, onset_envelope, MusicFeatureSequence,
    BEAT_COL, CHROMA_COLS, ENVELOPE_COL, FEATURE_DIM, MFCC_COLS, PEAK_COL,
};
pub use stft::{dct_ii, mel_filterbank, stft_power, StftConfig};
pub use wav::{parse_wav, write_wav};

use thiserror::Error;

/// Mono PCM audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if sample_rate == 0 {
            return Err(AudioError::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(AudioClip { samples, sample_rate })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Errors from audio parsing and feature extraction.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: String, got: String },
    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("empty audio clip")]
    Empty,
    #[error("clip too short: {samples} samples, analysis window is {window}")]
    ClipTooShort { samples: usize, window: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
