use super::stft::{dct_ii, mel_filterbank, stft_power, StftConfig};
use super::{AudioClip, AudioError};

/// Feature row width.
pub const FEATURE_DIM: usize = 35;
pub const ENVELOPE_COL: usize = 0;
pub const MFCC_COLS: std::ops::Range<usize> = 1..21;
pub const CHROMA_COLS: std::ops::Range<usize> = 21..33;
pub const PEAK_COL: usize = 33;
pub const BEAT_COL: usize = 34;

const N_MELS: usize = 64;
const N_MFCC: usize = 20;
const LOG_FLOOR: f64 = 1e-10;
/// Lowest frequency folded into chroma classes.
const CHROMA_MIN_HZ: f64 = 30.0;
/// Peaks snap to the tempo grid within this many frames.
const BEAT_SNAP_FRAMES: i64 = 2;

/// Per-frame music features, `L × 35` in the column order
/// `[envelope, mfcc(20), chroma(12), peak, beat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicFeatureSequence {
    frames: usize,
    pub fps: f64,
    data: Vec<f64>,
}

impl MusicFeatureSequence {
    pub fn new(frames: usize, fps: f64, data: Vec<f64>) -> Result<Self, AudioError> {
        if data.len() != frames * FEATURE_DIM {
            return Err(AudioError::InvalidConfig(format!(
                "feature data has {} values, expected {}",
                data.len(),
                frames * FEATURE_DIM
            )));
        }
        if !(fps > 0.0) {
            return Err(AudioError::InvalidConfig("fps must be positive".into()));
        }
        for i in 0..frames {
            let row = &data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            if row[ENVELOPE_COL] < 0.0 {
                return Err(AudioError::InvalidConfig(format!("negative envelope at frame {i}")));
            }
            for c in CHROMA_COLS {
                if row[c] < 0.0 {
                    return Err(AudioError::InvalidConfig(format!("negative chroma at frame {i}")));
                }
            }
            for c in [PEAK_COL, BEAT_COL] {
                if row[c] != 0.0 && row[c] != 1.0 {
                    return Err(AudioError::InvalidConfig(format!(
                        "one-hot column {c} at frame {i} is {}",
                        row[c]
                    )));
                }
            }
        }
        Ok(MusicFeatureSequence { frames, fps, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * FEATURE_DIM..(frame + 1) * FEATURE_DIM]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Frames whose beat column is set.
    pub fn beat_frames(&self) -> Vec<usize> {
        (0..self.frames).filter(|&i| self.row(i)[BEAT_COL] == 1.0).collect()
    }

    /// Truncate to the first `frames` rows.
    pub fn truncated(&self, frames: usize) -> MusicFeatureSequence {
        assert!(frames >= 1 && frames <= self.frames);
        MusicFeatureSequence {
            frames,
            fps: self.fps,
            data: self.data[..frames * FEATURE_DIM].to_vec(),
        }
    }
}

fn mel_magnitudes(clip: &AudioClip, fps: f64) -> Result<Vec<Vec<f64>>, AudioError> {
    let cfg = StftConfig::for_fps(clip.sample_rate, fps)?;
    let power = stft_power(clip, &cfg)?;
    let filters = mel_filterbank(N_MELS, cfg.bins(), cfg.window, clip.sample_rate);
    Ok(power
        .iter()
        .map(|frame| {
            filters
                .iter()
                .map(|f| f.iter().zip(frame.iter()).map(|(w, p)| w * p).sum::<f64>().sqrt())
                .collect()
        })
        .collect())
}

/// Spectral-flux onset strength: half-wave-rectified positive first
/// difference of mel magnitudes, summed over bands. The frame before the
/// clip is treated as silence, so an onset at time zero registers.
pub fn onset_envelope(clip: &AudioClip, fps: f64) -> Result<Vec<f64>, AudioError> {
    let mel = mel_magnitudes(clip, fps)?;
    let mut env = Vec::with_capacity(mel.len());
    for i in 0..mel.len() {
        let flux: f64 = mel[i]
            .iter()
            .enumerate()
            .map(|(m, &e)| {
                let prev = if i == 0 { 0.0 } else { mel[i - 1][m] };
                (e - prev).max(0.0)
            })
            .sum();
        env.push(flux);
    }
    Ok(env)
}

/// Mel-frequency cepstral coefficients: log mel power (floor 1e-10) through
/// an orthonormal DCT-II, keeping `n` coefficients.
pub fn mfcc(clip: &AudioClip, fps: f64, n: usize) -> Result<Vec<Vec<f64>>, AudioError> {
    let cfg = StftConfig::for_fps(clip.sample_rate, fps)?;
    let power = stft_power(clip, &cfg)?;
    let filters = mel_filterbank(N_MELS, cfg.bins(), cfg.window, clip.sample_rate);
    Ok(power
        .iter()
        .map(|frame| {
            let logmel: Vec<f64> = filters
                .iter()
                .map(|f| {
                    let p: f64 = f.iter().zip(frame.iter()).map(|(w, x)| w * x).sum();
                    (p + LOG_FLOOR).ln()
                })
                .collect();
            dct_ii(&logmel, n)
        })
        .collect())
}

/// Pitch-class energies: STFT bin powers folded onto 12 classes (class 0 =
/// A, A440 reference), max-normalized per frame when nonzero.
pub fn chroma(clip: &AudioClip, fps: f64) -> Result<Vec<Vec<f64>>, AudioError> {
    let cfg = StftConfig::for_fps(clip.sample_rate, fps)?;
    let power = stft_power(clip, &cfg)?;
    let bin_hz = clip.sample_rate as f64 / cfg.window as f64;
    Ok(power
        .iter()
        .map(|frame| {
            let mut classes = [0.0f64; 12];
            for (k, &p) in frame.iter().enumerate().skip(1) {
                let f = k as f64 * bin_hz;
                if f < CHROMA_MIN_HZ {
                    continue;
                }
                let semis = 12.0 * (f / 440.0).log2();
                let class = (semis.round() as i64).rem_euclid(12) as usize;
                classes[class] += p;
            }
            let max = classes.iter().cloned().fold(0.0f64, f64::max);
            if max > 0.0 {
                for c in classes.iter_mut() {
                    *c /= max;
                }
            }
            classes.to_vec()
        })
        .collect())
}

/// Peak picking plus constant-tempo beat snapping.
///
/// Peaks are local maxima of the envelope above `mean + std`, at least
/// `0.25 · fps` frames apart (stronger peaks win). The first frame may be a
/// peak when it dominates its right neighbor; the last frame never is.
/// Beats are the peaks snapped onto the best constant-tempo grid found by
/// exhaustive search over 60–180 BPM in 1-BPM steps (integer phase offsets),
/// maximizing summed envelope at grid points; ties prefer lower BPM.
pub fn detect_peaks_beats(envelope: &[f64], fps: f64) -> (Vec<f64>, Vec<f64>) {
    let l = envelope.len();
    let mut peaks = vec![0.0; l];
    let beats = vec![0.0; l];
    if l < 3 {
        return (peaks, beats);
    }
    let mean = envelope.iter().sum::<f64>() / l as f64;
    let var = envelope.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / l as f64;
    let thresh = mean + var.sqrt();

    let mut candidates: Vec<usize> = Vec::new();
    if envelope[0] > envelope[1] && envelope[0] > thresh {
        candidates.push(0);
    }
    for i in 1..l - 1 {
        if envelope[i] > envelope[i - 1] && envelope[i] > envelope[i + 1] && envelope[i] > thresh {
            candidates.push(i);
        }
    }
    // enforce minimum separation, strongest first
    let min_sep = (0.25 * fps).round() as i64;
    candidates.sort_by(|a, b| {
        envelope[*b]
            .partial_cmp(&envelope[*a])
            .unwrap()
            .then(a.cmp(b))
    });
    let mut accepted: Vec<usize> = Vec::new();
    for &c in &candidates {
        if accepted.iter().all(|&a| (a as i64 - c as i64).abs() >= min_sep) {
            accepted.push(c);
        }
    }
    for &p in &accepted {
        peaks[p] = 1.0;
    }
    if accepted.is_empty() {
        return (peaks, beats);
    }

    // constant-tempo grid search
    let mut best = (f64::NEG_INFINITY, 0u32, 0usize); // (score, bpm, phase)
    for bpm in 60..=180u32 {
        let period = fps * 60.0 / bpm as f64;
        let max_phase = period.ceil() as usize;
        for phase in 0..max_phase {
            let mut score = 0.0;
            let mut k = 0usize;
            loop {
                let g = (phase as f64 + k as f64 * period).round() as usize;
                if g >= l {
                    break;
                }
                score += envelope[g];
                k += 1;
            }
            if score > best.0 + 1e-12 {
                best = (score, bpm, phase);
            }
        }
    }
    let (_, bpm, phase) = best;
    let period = fps * 60.0 / bpm as f64;
    let mut beats = beats;
    for &p in &accepted {
        let k = ((p as f64 - phase as f64) / period).round().max(0.0);
        let g = (phase as f64 + k * period).round() as i64;
        if (g - p as i64).abs() <= BEAT_SNAP_FRAMES {
            let g = g.clamp(0, l as i64 - 1) as usize;
            beats[g] = 1.0;
        }
    }
    (peaks, beats)
}

/// Full 35-dimensional feature extraction: envelope, MFCC, chroma, peak and
/// beat one-hots, concatenated in the documented column order.
pub fn extract_features(clip: &AudioClip, fps: f64) -> Result<MusicFeatureSequence, AudioError> {
    let env = onset_envelope(clip, fps)?;
    let mfccs = mfcc(clip, fps, N_MFCC)?;
    let chromas = chroma(clip, fps)?;
    let (peaks, beats) = detect_peaks_beats(&env, fps);
    let l = env.len();
    let mut data = Vec::with_capacity(l * FEATURE_DIM);
    for i in 0..l {
        data.push(env[i]);
        data.extend_from_slice(&mfccs[i]);
        data.extend_from_slice(&chromas[i]);
        data.push(peaks[i]);
        data.push(beats[i]);
    }
    MusicFeatureSequence::new(l, fps, data)
}
