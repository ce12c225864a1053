use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioClip, AudioError};

/// STFT analysis parameters.
///
/// The hop is `sample_rate / fps`, which must divide evenly so one feature
/// frame corresponds to exactly one motion frame.
#[derive(Debug, Clone, Copy)]
pub struct StftConfig {
    pub window: usize,
    pub hop: usize,
}

impl StftConfig {
    pub const DEFAULT_WINDOW: usize = 1024;

    pub fn for_fps(sample_rate: u32, fps: f64) -> Result<Self, AudioError> {
        if !(fps > 0.0) {
            return Err(AudioError::InvalidConfig(format!("fps must be positive, got {fps}")));
        }
        let hop = sample_rate as f64 / fps;
        if hop.fract() != 0.0 {
            return Err(AudioError::InvalidConfig(format!(
                "sample rate {sample_rate} is not divisible by fps {fps}"
            )));
        }
        Ok(StftConfig {
            window: Self::DEFAULT_WINDOW,
            hop: hop as usize,
        })
    }

    pub fn bins(&self) -> usize {
        self.window / 2 + 1
    }

    /// Number of analysis frames: only windows that lie fully inside the
    /// signal are used, so no frame mixes padding into its spectrum.
    pub fn frames(&self, samples: usize) -> usize {
        if samples < self.window {
            0
        } else {
            (samples - self.window) / self.hop + 1
        }
    }

    /// Samples needed so that exactly `frames` full windows fit.
    pub fn samples_for_frames(&self, frames: usize) -> usize {
        (frames - 1) * self.hop + self.window
    }
}

/// Power spectrogram `[frames × bins]` of a Hann-window STFT. Frame `i`
/// covers samples `[i·hop, i·hop + window)`; only full windows are analyzed.
pub fn stft_power(clip: &AudioClip, cfg: &StftConfig) -> Result<Vec<Vec<f64>>, AudioError> {
    let n = clip.samples.len();
    if n < cfg.window {
        return Err(AudioError::ClipTooShort {
            samples: n,
            window: cfg.window,
        });
    }
    let window: Vec<f64> = (0..cfg.window)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / cfg.window as f64).cos()))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(cfg.window);
    let frames = cfg.frames(n);
    let bins = cfg.bins();
    let mut out = Vec::with_capacity(frames);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.window];
    for f in 0..frames {
        let start = f * cfg.hop;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(clip.samples[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..bins].iter().map(|c| c.norm_sqr()).collect());
    }
    Ok(out)
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank `[n_mels × bins]` spanning 0..sr/2 with
/// unit-peak filters.
pub fn mel_filterbank(n_mels: usize, bins: usize, window: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let f_max = sample_rate as f64 / 2.0;
    let m_max = hz_to_mel(f_max);
    let centers: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(m_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / window as f64;
    let mut filters = vec![vec![0.0; bins]; n_mels];
    for m in 0..n_mels {
        let (lo, mid, hi) = (centers[m], centers[m + 1], centers[m + 2]);
        for k in 0..bins {
            let f = k as f64 * bin_hz;
            if f > lo && f < hi {
                filters[m][k] = if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                };
            }
        }
    }
    filters
}

/// Orthonormal DCT-II of `x`, keeping the first `n` coefficients.
pub fn dct_ii(x: &[f64], n: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..n)
        .map(|j| {
            let scale = if j == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(k, &v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / m).cos())
                .sum();
            scale * sum
        })
        .collect()
}
