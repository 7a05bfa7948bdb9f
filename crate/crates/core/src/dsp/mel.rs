use serde::{Deserialize, Serialize};

use super::stft::{PowerStft, SpectrogramConfig};
use super::wav::AudioClip;
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney Mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

/// Band edges in Hz: `n_mels + 2` points evenly spaced on the Mel axis.
pub(crate) fn band_edges(n_mels: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let lo = hz_to_mel(f_min);
    let hi = hz_to_mel(f_max);
    let steps = (n_mels + 1) as f64;
    (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / steps))
        .collect()
}

fn triangles(sample_rate: u32, window_size: usize, edges: &[f64]) -> RowMatrix {
    let n_bins = window_size / 2 + 1;
    let n_mels = edges.len() - 2;
    let bin_hz = f64::from(sample_rate) / window_size as f64;
    let mut fb = RowMatrix::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = fb.row_mut(m);
        for (bin, w) in row.iter_mut().enumerate() {
            let f = bin as f64 * bin_hz;
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            *w = rising.min(falling).max(0.0);
        }
    }
    fb
}

/// Triangular Mel filterbank of shape `n_mels x (window_size/2 + 1)`.
///
/// Each triangle is scaled by `2 / (right_edge - left_edge)` (Slaney area
/// normalization). Fails if any filter falls between FFT bins and ends up
/// all-zero.
pub fn mel_filterbank(
    sample_rate: u32,
    window_size: usize,
    n_mels: usize,
    f_min: f64,
    f_max: f64,
) -> Result<RowMatrix> {
    let cfg = SpectrogramConfig {
        window_size,
        hop_size: window_size.max(1),
        n_mels,
        f_min,
        f_max,
        ..Default::default()
    };
    cfg.validate_for_rate(sample_rate)?;
    let edges = band_edges(n_mels, f_min, f_max);
    let mut fb = triangles(sample_rate, window_size, &edges);
    for m in 0..n_mels {
        let norm = 2.0 / (edges[m + 2] - edges[m]);
        let row = fb.row_mut(m);
        if row.iter().all(|&w| w == 0.0) {
            return Err(Error::Config(format!(
                "Mel filter {m} of {n_mels} covers no FFT bin; reduce n_mels or enlarge the window"
            )));
        }
        row.iter_mut().for_each(|w| *w *= norm);
    }
    Ok(fb)
}

/// Log-Mel energies in decibels, one row per Mel band and one column per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMelSpectrogram {
    values: RowMatrix,
}

impl LogMelSpectrogram {
    /// Wraps an existing bands x frames matrix. Fails on an empty or non-finite matrix.
    pub fn from_matrix(values: RowMatrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Parameter("spectrogram must be non-empty".into()));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "spectrogram has non-finite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_matrix(RowMatrix::from_rows(rows))
    }

    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &RowMatrix {
        &self.values
    }

    pub fn band(&self, m: usize) -> &[f64] {
        self.values.row(m)
    }
}

/// Precomputed window, FFT plan and filterbank for one sample rate.
///
/// Immutable after construction, so one extractor can serve many threads.
#[derive(Clone)]
pub struct LogMelExtractor {
    cfg: SpectrogramConfig,
    sample_rate: u32,
    stft: PowerStft,
    filterbank: RowMatrix,
    // (first, last+1) nonzero bin per filter
    support: Vec<(usize, usize)>,
}

impl LogMelExtractor {
    pub fn new(cfg: &SpectrogramConfig, sample_rate: u32) -> Result<Self> {
        let filterbank = mel_filterbank(
            sample_rate,
            cfg.window_size,
            cfg.n_mels,
            cfg.f_min,
            cfg.f_max,
        )?;
        cfg.validate()?;
        let support = filterbank
            .iter_rows()
            .map(|row| {
                let first = row.iter().position(|&w| w != 0.0).unwrap_or(0);
                let last = row.iter().rposition(|&w| w != 0.0).map_or(0, |i| i + 1);
                (first, last)
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate,
            stft: PowerStft::new(cfg),
            filterbank,
            support,
        })
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.cfg
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn filterbank(&self) -> &RowMatrix {
        &self.filterbank
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<LogMelSpectrogram> {
        if clip.sample_rate() != self.sample_rate {
            return Err(Error::Parameter(format!(
                "clip sample rate {} does not match extractor rate {}",
                clip.sample_rate(),
                self.sample_rate
            )));
        }
        let power = self.stft.compute(clip.samples())?;
        let n_frames = power.cols();
        let mut out = RowMatrix::zeros(self.cfg.n_mels, n_frames);
        for (m, &(first, last)) in self.support.iter().enumerate() {
            let weights = &self.filterbank.row(m)[first..last];
            let dst = out.row_mut(m);
            for (bin, &w) in (first..last).zip(weights) {
                for (d, &p) in dst.iter_mut().zip(power.row(bin)) {
                    *d += w * p;
                }
            }
            for d in dst.iter_mut() {
                *d = 10.0 * d.max(self.cfg.log_floor).log10();
            }
        }
        LogMelSpectrogram::from_matrix(out)
    }
}

/// `10 * log10(max(filterbank * power, log_floor))` for one clip.
pub fn log_mel(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<LogMelSpectrogram> {
    LogMelExtractor::new(cfg, clip.sample_rate())?.extract(clip)
}
