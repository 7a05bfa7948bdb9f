use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::wav::AudioClip;
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// Analysis window applied to each frame before the FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann window.
    #[default]
    Hann,
    /// No tapering. Useful for checking bin-aligned tones.
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }
}

/// Front-end parameters shared by the STFT and the Mel filterbank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
    pub window: WindowKind,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            window_size: 1024,
            hop_size: 512,
            n_mels: 128,
            f_min: 0.0,
            f_max: 8000.0,
            log_floor: 1e-10,
            window: WindowKind::Hann,
        }
    }
}

impl SpectrogramConfig {
    /// Checks the parameter invariants that do not depend on audio.
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::Config("window_size must be positive".into()));
        }
        if self.hop_size == 0 || self.hop_size > self.window_size {
            return Err(Error::Config(format!(
                "hop_size must be in 1..={}, got {}",
                self.window_size, self.hop_size
            )));
        }
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return Err(Error::Config(format!(
                "need 0 <= f_min < f_max, got f_min={} f_max={}",
                self.f_min, self.f_max
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config(
                "log_floor must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Checks the invariants plus `f_max <= sample_rate / 2`.
    pub fn validate_for_rate(&self, sample_rate: u32) -> Result<()> {
        self.validate()?;
        let nyquist = f64::from(sample_rate) / 2.0;
        if self.f_max > nyquist {
            return Err(Error::Config(format!(
                "f_max {} exceeds Nyquist frequency {nyquist}",
                self.f_max
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.window_size / 2 + 1
    }
}

/// Number of whole frames in `num_samples`; the trailing partial frame is dropped.
pub fn frame_count(num_samples: usize, window_size: usize, hop_size: usize) -> Option<usize> {
    (num_samples >= window_size).then(|| (num_samples - window_size) / hop_size + 1)
}

/// Reusable STFT state: window coefficients plus a planned FFT.
#[derive(Clone)]
pub(crate) struct PowerStft {
    window: Vec<f64>,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl PowerStft {
    pub(crate) fn new(cfg: &SpectrogramConfig) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(cfg.window_size);
        Self {
            window: cfg.window.coefficients(cfg.window_size),
            hop: cfg.hop_size,
            fft,
        }
    }

    /// `|STFT|^2` laid out bins x frames.
    pub(crate) fn compute(&self, samples: &[f64]) -> Result<RowMatrix> {
        let width = self.window.len();
        let n_frames = frame_count(samples.len(), width, self.hop).ok_or(Error::ClipTooShort {
            samples: samples.len(),
            window: width,
        })?;
        let n_bins = width / 2 + 1;
        let mut out = RowMatrix::zeros(n_bins, n_frames);
        let mut buf = vec![Complex::new(0.0, 0.0); width];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for frame in 0..n_frames {
            let start = frame * self.hop;
            for ((b, &s), &w) in buf
                .iter_mut()
                .zip(&samples[start..start + width])
                .zip(&self.window)
            {
                *b = Complex::new(s * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (bin, c) in buf.iter().take(n_bins).enumerate() {
                out.set(bin, frame, c.norm_sqr());
            }
        }
        Ok(out)
    }
}

/// Power spectrogram `|STFT(f, n)|^2` of shape `(window_size/2 + 1) x N`.
///
/// Frames start at sample 0 and advance by `hop_size`; no padding is added.
pub fn power_spectrogram(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<RowMatrix> {
    cfg.validate()?;
    PowerStft::new(cfg).compute(clip.samples())
}
