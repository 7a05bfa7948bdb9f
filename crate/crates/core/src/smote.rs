//! SMOTE oversampling of scarce target-domain feature vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteOptions {
    pub k_neighbors: usize,
    /// Desired total number of vectors after oversampling.
    pub target_count: usize,
    pub seed: u64,
}

/// Originals plus their precomputed nearest-neighbour lists.
#[derive(Debug, Clone)]
pub struct Smote<'a> {
    originals: &'a [Vec<f64>],
    neighbors: Vec<Vec<usize>>,
}

impl<'a> Smote<'a> {
    /// Indexes `originals`; `k_neighbors` is clamped to `count - 1`.
    pub fn new(originals: &'a [Vec<f64>], k_neighbors: usize) -> Result<Self> {
        if originals.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: originals.len(),
            });
        }
        if k_neighbors == 0 {
            return Err(Error::Parameter("k_neighbors must be at least 1".into()));
        }
        let dim = originals[0].len();
        if let Some(bad) = originals.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        let k = k_neighbors.min(originals.len() - 1);
        let neighbors = (0..originals.len())
            .map(|i| {
                let mut others: Vec<(f64, usize)> = (0..originals.len())
                    .filter(|&j| j != i)
                    .map(|j| (sq_dist(&originals[i], &originals[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect();
        Ok(Self {
            originals,
            neighbors,
        })
    }

    /// Effective neighbour count after clamping.
    pub fn k(&self) -> usize {
        self.neighbors[0].len()
    }

    /// Indices of the nearest originals of `base`, closest first.
    pub fn neighbors(&self, base: usize) -> &[usize] {
        &self.neighbors[base]
    }

    /// `x + step * (x_nn - x)` for original `base` and its `rank`-th neighbour.
    pub fn synthesize(&self, base: usize, rank: usize, step: f64) -> Vec<f64> {
        let x = &self.originals[base];
        let nn = &self.originals[self.neighbors[base][rank]];
        x.iter().zip(nn).map(|(a, b)| a + step * (b - a)).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Returns the originals followed by `target_count - len` synthetic vectors.
pub fn smote_oversample(features: &[Vec<f64>], opts: &SmoteOptions) -> Result<Vec<Vec<f64>>> {
    if opts.target_count < features.len() {
        return Err(Error::Parameter(format!(
            "target_count {} is below the {} input vectors",
            opts.target_count,
            features.len()
        )));
    }
    let smote = Smote::new(features, opts.k_neighbors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = features.to_vec();
    out.reserve(opts.target_count - features.len());
    while out.len() < opts.target_count {
        let base = rng.random_range(0..features.len());
        let rank = rng.random_range(0..smote.k());
        let step: f64 = rng.random();
        out.push(smote.synthesize(base, rank, step));
    }
    Ok(out)
}
