//! Time-weighted frequency representation (TWFR).
//!
//! Every Mel band is sorted over time in descending order and collapsed with
//! geometric rank weights `r^n / z(r)`. `r = 0` keeps only the loudest frame
//! (max pooling) and `r = 1` weights all frames equally (mean pooling).

use crate::dsp::LogMelSpectrogram;
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// Normalized rank weights `[r^0, r^1, ..., r^(N-1)] / z(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingVector {
    weights: Vec<f64>,
    r: f64,
    z: f64,
}

impl PoolingVector {
    pub fn new(r: f64, n_frames: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Parameter(format!(
                "pooling weight r must be in [0, 1], got {r}"
            )));
        }
        if n_frames == 0 {
            return Err(Error::Parameter("pooling needs at least one frame".into()));
        }
        // Direct summation; 0^0 = 1 so r = 0 is exactly max pooling.
        let mut powers = Vec::with_capacity(n_frames);
        let mut p = 1.0;
        for _ in 0..n_frames {
            powers.push(p);
            p *= r;
        }
        let z: f64 = powers.iter().sum();
        let weights = powers.into_iter().map(|w| w / z).collect();
        Ok(Self { weights, r, z })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn normalizer(&self) -> f64 {
        self.z
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weighted sum of an already descending-sorted sequence.
    pub fn pool_sorted(&self, sorted: &[f64]) -> f64 {
        debug_assert_eq!(sorted.len(), self.weights.len());
        sorted.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }
}

/// Shorthand for [`PoolingVector::new`].
pub fn pooling_vector(r: f64, n_frames: usize) -> Result<PoolingVector> {
    PoolingVector::new(r, n_frames)
}

/// One pooled value per Mel band.
#[derive(Debug, Clone, PartialEq)]
pub struct TwfrVector(pub Vec<f64>);

impl TwfrVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Copy of the spectrogram with every band sorted in nonincreasing order.
pub fn row_descending_sort(spec: &LogMelSpectrogram) -> RowMatrix {
    let mut sorted = spec.values().clone();
    for m in 0..sorted.rows() {
        sorted.row_mut(m).sort_unstable_by(|a, b| b.total_cmp(a));
    }
    sorted
}

/// A spectrogram whose bands are already sorted, kept around so that many
/// `r` values can be pooled without re-sorting.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSpectrogram {
    sorted: RowMatrix,
}

impl RankedSpectrogram {
    pub fn new(spec: &LogMelSpectrogram) -> Self {
        Self {
            sorted: row_descending_sort(spec),
        }
    }

    pub fn sorted(&self) -> &RowMatrix {
        &self.sorted
    }

    pub fn n_mels(&self) -> usize {
        self.sorted.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.sorted.cols()
    }

    pub fn pool(&self, weights: &PoolingVector) -> Result<TwfrVector> {
        if weights.len() != self.n_frames() {
            return Err(Error::DimensionMismatch {
                expected: self.n_frames(),
                actual: weights.len(),
            });
        }
        Ok(TwfrVector(
            self.sorted
                .iter_rows()
                .map(|row| weights.pool_sorted(row))
                .collect(),
        ))
    }

    pub fn twfr(&self, r: f64) -> Result<TwfrVector> {
        self.pool(&PoolingVector::new(r, self.n_frames())?)
    }
}

/// Global weighted ranking pooling of each band over time.
pub fn gwrp(spec: &LogMelSpectrogram, r: f64) -> Result<TwfrVector> {
    let weights = PoolingVector::new(r, spec.n_frames())?;
    RankedSpectrogram::new(spec).pool(&weights)
}
