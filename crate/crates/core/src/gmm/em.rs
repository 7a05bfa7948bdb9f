use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GmmModel, LN_2PI};
use crate::error::{Error, Result};

/// EM settings. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub k: usize,
    /// Added to every covariance diagonal.
    pub reg_covar: f64,
    /// Convergence threshold on the change in mean log-likelihood.
    pub tol: f64,
    pub max_iter: usize,
    pub n_init: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k: 1,
            reg_covar: 1e-6,
            tol: 1e-3,
            max_iter: 100,
            n_init: 1,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.reg_covar.is_nan() || self.reg_covar < 0.0 {
            return Err(Error::Parameter("reg_covar must be nonnegative".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Parameter("tol must be positive".into()));
        }
        if self.max_iter == 0 || self.n_init == 0 {
            return Err(Error::Parameter(
                "max_iter and n_init must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A fitted model together with its EM trace.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GmmModel,
    /// Mean per-sample log-likelihood evaluated at the start of each EM
    /// iteration of the winning restart.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitOutcome {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihood
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Fits a full-covariance mixture by EM, keeping the best of `n_init` restarts.
pub fn fit_gmm<V: AsRef<[f64]>>(features: &[V], opts: &FitOptions) -> Result<GmmModel> {
    fit_gmm_traced(features, opts).map(|o| o.model)
}

pub fn fit_gmm_traced<V: AsRef<[f64]>>(features: &[V], opts: &FitOptions) -> Result<FitOutcome> {
    opts.validate()?;
    let data = to_columns(features)?;
    if data.ncols() < opts.k {
        return Err(Error::TooFewSamples {
            needed: opts.k,
            got: data.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<FitOutcome> = None;
    for _ in 0..opts.n_init {
        let outcome = run_em(&data, opts, &mut rng)?;
        let better = best
            .as_ref()
            .is_none_or(|b| outcome.final_log_likelihood() > b.final_log_likelihood());
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn to_columns<V: AsRef<[f64]>>(features: &[V]) -> Result<DMatrix<f64>> {
    let dim = features.first().map_or(0, |f| f.as_ref().len());
    if dim == 0 {
        return Err(Error::TooFewSamples {
            needed: 1,
            got: features.len(),
        });
    }
    let mut data = DMatrix::zeros(dim, features.len());
    for (j, f) in features.iter().enumerate() {
        let f = f.as_ref();
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "feature vector {j} is not finite"
            )));
        }
        data.column_mut(j).copy_from_slice(f);
    }
    Ok(data)
}

/// Mixture parameters during EM.
struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
}

impl Params {
    fn into_model(self) -> Result<GmmModel> {
        GmmModel::from_parts(
            self.weights
                .into_iter()
                .zip(self.means)
                .zip(self.covariances)
                .map(|((w, m), c)| (w, m, c))
                .collect(),
        )
    }
}

fn run_em(data: &DMatrix<f64>, opts: &FitOptions, rng: &mut ChaCha8Rng) -> Result<FitOutcome> {
    let labels = kmeans_labels(data, opts.k, rng);
    let mut resp = DMatrix::zeros(data.ncols(), opts.k);
    for (i, &l) in labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let mut params = m_step(data, &resp, opts.reg_covar);

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let model = params.into_model()?;
        let mean_ll = e_step(data, &model, &mut resp);
        let prev = history.last().copied();
        history.push(mean_ll);
        params = m_step(data, &resp, opts.reg_covar);
        if prev.is_some_and(|p: f64| (mean_ll - p).abs() < opts.tol) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "EM did not converge in {} iterations (k = {})",
            opts.max_iter,
            opts.k
        );
    }
    Ok(FitOutcome {
        model: params.into_model()?,
        log_likelihood: history,
        converged,
        iterations,
    })
}

/// Per-sample log-density of every component, samples x components.
fn log_densities(data: &DMatrix<f64>, model: &GmmModel) -> DMatrix<f64> {
    let (dim, n) = data.shape();
    let mut out = DMatrix::zeros(n, model.n_components());
    for (k, comp) in model.components.iter().enumerate() {
        let mut centered = data.clone();
        for mut col in centered.column_iter_mut() {
            col -= &comp.mean;
        }
        let white = &comp.precision_factor * centered;
        let constant = dim as f64 * LN_2PI + comp.log_det;
        for (i, col) in white.column_iter().enumerate() {
            out[(i, k)] = -0.5 * (constant + col.norm_squared());
        }
    }
    out
}

/// Fills `resp` with posterior responsibilities; returns the mean log-likelihood.
fn e_step(data: &DMatrix<f64>, model: &GmmModel, resp: &mut DMatrix<f64>) -> f64 {
    let mut weighted = log_densities(data, model);
    let log_w: Vec<f64> = model.components.iter().map(|c| c.weight.ln()).collect();
    let n = data.ncols();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = weighted.row_mut(i);
        for (v, lw) in row.iter_mut().zip(&log_w) {
            *v += lw;
        }
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse;
        for (k, v) in row.iter().enumerate() {
            resp[(i, k)] = (v - lse).exp();
        }
    }
    total / n as f64
}

fn m_step(data: &DMatrix<f64>, resp: &DMatrix<f64>, reg_covar: f64) -> Params {
    let (dim, n) = data.shape();
    let k = resp.ncols();
    // Centering on the first sample keeps a cluster of identical points exact.
    let anchor = data.column(0).into_owned();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for c in 0..k {
        let r = resp.column(c);
        let nk = r.sum() + 10.0 * f64::EPSILON;
        let mut offset = DVector::zeros(dim);
        for (i, &ri) in r.iter().enumerate() {
            if ri != 0.0 {
                offset.axpy(ri, &(data.column(i) - &anchor), 1.0);
            }
        }
        let mean = &anchor + offset / nk;

        let mut scaled = DMatrix::zeros(dim, n);
        for (i, &ri) in r.iter().enumerate() {
            if ri != 0.0 {
                let w = ri.sqrt();
                scaled
                    .column_mut(i)
                    .copy_from(&((data.column(i) - &mean) * w));
            }
        }
        let mut cov = &scaled * scaled.transpose() / nk;
        for a in 0..dim {
            for b in a + 1..dim {
                let s = 0.5 * (cov[(a, b)] + cov[(b, a)]);
                cov[(a, b)] = s;
                cov[(b, a)] = s;
            }
            cov[(a, a)] += reg_covar;
        }
        weights.push(nk);
        means.push(mean);
        covariances.push(cov);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Params {
        weights,
        means,
        covariances,
    }
}

fn sq_dist(a: nalgebra::DVectorView<f64>, b: nalgebra::DVectorView<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; returns hard labels.
fn kmeans_labels(data: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.ncols();
    if k == 1 {
        return vec![0; n];
    }
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(k);
    centers.push(data.column(rng.random_range(0..n)).into_owned());
    let mut closest: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.column(i), centers[0].column(0)))
        .collect();
    while centers.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            closest
                .iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let center = data.column(pick).into_owned();
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.column(i), center.column(0)));
        }
        centers.push(center);
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let col = data.column(i);
            let best = (0..k)
                .map(|c| (c, sq_dist(col, centers[c].column(0))))
                .fold(
                    (0, f64::INFINITY),
                    |acc, cur| if cur.1 < acc.1 { cur } else { acc },
                )
                .0;
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mut sum = DVector::zeros(data.nrows());
            for &i in &members {
                sum += data.column(i);
            }
            *center = sum / members.len() as f64;
        }
    }
    labels
}
