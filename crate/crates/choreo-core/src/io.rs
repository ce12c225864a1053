//! Binary file formats: `GMOT` group motion, `TRAJ` trajectories, `MFEA`
//! music features, and `CKPT` model checkpoints.
//!
//! The three data formats store `f32` little-endian payloads behind a
//! 4-byte magic; checkpoints store named `f64` tensors with a format
//! version. Readers fail with distinct errors for a wrong magic, a bad
//! version, and truncation.
//!
//! Layouts:
//! - `GMOT`: magic, u32 dancers, u32 frames, f32 fps, then `C·L·151`
//!   channel values per frame in `[contact, root, pose]` order.
//! - `TRAJ`: magic, u32 dancers, u32 frames, f32 fps, then `C·L·3`.
//! - `MFEA`: magic, u32 frames, u32 width (= 35), the `L·35` row-major
//!   values, then f32 fps.
//! - `CKPT`: magic, u32 version (= 1), u32 count, then per tensor: u32 name
//!   length, UTF-8 name, u32 rank, u32 dims, f64 values.

use std::path::Path;

use thiserror::Error;

use crate::audio::{MusicFeatureSequence, FEATURE_DIM};
use crate::dbn::TrajectorySequence;
use crate::motion::{GroupMotionSequence, FRAME_DIM};
use crate::nn::{ParamStore, Tensor};

pub const CKPT_VERSION: u32 = 1;

/// Errors from the binary file formats.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: String, got: String },
    #[error("truncated file while reading {0}")]
    Truncated(String),
    #[error("unsupported checkpoint version {0}, expected {CKPT_VERSION}")]
    BadVersion(u32),
    #[error("invalid contents: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, at: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IoError> {
        let slice = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| IoError::Truncated(what.to_string()))?;
        self.at += n;
        Ok(slice)
    }

    fn magic(&mut self, expected: &str) -> Result<(), IoError> {
        let got = self.take(4, "magic")?;
        if got != expected.as_bytes() {
            return Err(IoError::BadMagic {
                expected: expected.to_string(),
                got: String::from_utf8_lossy(got).into_owned(),
            });
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32, IoError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self, what: &str) -> Result<f32, IoError> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32_slice(&mut self, count: usize, what: &str) -> Result<Vec<f64>, IoError> {
        let b = self.take(4 * count, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    fn f64_slice(&mut self, count: usize, what: &str) -> Result<Vec<f64>, IoError> {
        let b = self.take(8 * count, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }

    fn done(&self) -> Result<(), IoError> {
        if self.at != self.bytes.len() {
            return Err(IoError::Invalid(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.at
            )));
        }
        Ok(())
    }
}

fn push_f32s(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

// ---- GMOT -------------------------------------------------------------

pub fn encode_motion(seq: &GroupMotionSequence) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"GMOT");
    out.extend_from_slice(&(seq.dancers() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.fps as f32).to_le_bytes());
    push_f32s(&mut out, seq.to_channels().into_iter());
    out
}

pub fn decode_motion(bytes: &[u8]) -> Result<GroupMotionSequence, IoError> {
    let mut r = Reader::new(bytes);
    r.magic("GMOT")?;
    let dancers = r.u32("dancer count")? as usize;
    let frames = r.u32("frame count")? as usize;
    let fps = r.f32("fps")? as f64;
    let channels = r.f32_slice(dancers * frames * FRAME_DIM, "motion channels")?;
    r.done()?;
    GroupMotionSequence::from_channels(dancers, frames, fps, &channels)
        .map_err(|e| IoError::Invalid(e.to_string()))
}

// ---- TRAJ -------------------------------------------------------------

pub fn encode_trajectory(traj: &TrajectorySequence) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"TRAJ");
    out.extend_from_slice(&(traj.dancers() as u32).to_le_bytes());
    out.extend_from_slice(&(traj.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(traj.fps as f32).to_le_bytes());
    push_f32s(
        &mut out,
        traj.positions().iter().flatten().flatten().copied(),
    );
    out
}

pub fn decode_trajectory(bytes: &[u8]) -> Result<TrajectorySequence, IoError> {
    let mut r = Reader::new(bytes);
    r.magic("TRAJ")?;
    let dancers = r.u32("dancer count")? as usize;
    let frames = r.u32("frame count")? as usize;
    let fps = r.f32("fps")? as f64;
    let flat = r.f32_slice(dancers * frames * 3, "positions")?;
    r.done()?;
    let positions = (0..dancers)
        .map(|c| {
            (0..frames)
                .map(|f| {
                    let at = (c * frames + f) * 3;
                    [flat[at], flat[at + 1], flat[at + 2]]
                })
                .collect()
        })
        .collect();
    TrajectorySequence::new(positions, fps).map_err(|e| IoError::Invalid(e.to_string()))
}

// ---- MFEA -------------------------------------------------------------

pub fn encode_features(features: &MusicFeatureSequence) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MFEA");
    out.extend_from_slice(&(features.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    push_f32s(&mut out, features.data().iter().copied());
    out.extend_from_slice(&(features.fps as f32).to_le_bytes());
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<MusicFeatureSequence, IoError> {
    let mut r = Reader::new(bytes);
    r.magic("MFEA")?;
    let frames = r.u32("frame count")? as usize;
    let width = r.u32("width")? as usize;
    if width != FEATURE_DIM {
        return Err(IoError::Invalid(format!(
            "feature width {width}, expected {FEATURE_DIM}"
        )));
    }
    let data = r.f32_slice(frames * width, "feature rows")?;
    let fps = r.f32("fps")? as f64;
    r.done()?;
    MusicFeatureSequence::new(frames, fps, data).map_err(|e| IoError::Invalid(e.to_string()))
}

// ---- CKPT -------------------------------------------------------------

pub fn encode_checkpoint(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"CKPT");
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, tensor) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for d in tensor.shape() {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Load a checkpoint into an existing store. Every tensor in the file must
/// match a parameter of the same name and shape; parameters missing from
/// the file are left untouched.
pub fn load_checkpoint(bytes: &[u8], store: &mut ParamStore) -> Result<(), IoError> {
    let mut r = Reader::new(bytes);
    r.magic("CKPT")?;
    let version = r.u32("version")?;
    if version != CKPT_VERSION {
        return Err(IoError::BadVersion(version));
    }
    let count = r.u32("tensor count")? as usize;
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "name")?.to_vec())
            .map_err(|_| IoError::Invalid("non-UTF-8 tensor name".into()))?;
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let len: usize = shape.iter().product();
        let data = r.f64_slice(len, "tensor values")?;
        let tensor = Tensor::new(shape.clone(), data);
        match store.id_of(&name) {
            None => return Err(IoError::Invalid(format!("unknown parameter {name:?}"))),
            Some(id) => {
                if store.get(id).shape() != shape.as_slice() {
                    return Err(IoError::Invalid(format!("shape mismatch for {name:?}")));
                }
            }
        }
        store.load(&name, tensor);
    }
    r.done()
}

// ---- path helpers -------------------------------------------------------

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    Ok(std::fs::read(path)?)
}
