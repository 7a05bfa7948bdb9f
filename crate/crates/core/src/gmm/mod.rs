//! Full-covariance Gaussian mixtures: EM fitting, negative log-likelihood
//! scoring, and the minimum-over-components Mahalanobis metric.

mod em;
mod io;

pub use em::{fit_gmm, fit_gmm_traced, FitOptions, FitOutcome};
pub use io::{read_model, write_model, ModelHeader, FORMAT_VERSION, MAGIC};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// How [`GmmModel::anomaly_score_with`] combines component densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringRule {
    /// `-max_k log N(x | mu_k, Sigma_k)`; mixture weights ignored.
    #[default]
    BestComponent,
    /// `-max_k (log pi_k + log N(x | mu_k, Sigma_k))`.
    BestWeightedComponent,
}

impl ScoringRule {
    pub fn from_flag(include_component_weight: bool) -> Self {
        if include_component_weight {
            Self::BestWeightedComponent
        } else {
            Self::BestComponent
        }
    }
}

/// Negative log-density of a feature vector; larger is more anomalous.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AnomalyScore(pub f64);

impl AnomalyScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    // W = L^-1 where Sigma = L L^T, so Sigma^-1 = W^T W.
    precision_factor: DMatrix<f64>,
    log_det: f64,
}

impl Component {
    fn new(
        index: usize,
        weight: f64,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self> {
        let chol = Cholesky::new(covariance.clone())
            .ok_or(Error::SingularCovariance { component: index })?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::SingularCovariance { component: index });
        }
        let dim = l.nrows();
        let precision_factor = l
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .ok_or(Error::SingularCovariance { component: index })?;
        Ok(Self {
            weight,
            mean,
            covariance,
            precision_factor,
            log_det,
        })
    }

    fn whitened_norm_sq(&self, delta: &DVector<f64>) -> f64 {
        (&self.precision_factor * delta).norm_squared()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let dim = self.mean.len() as f64;
        let delta = x - &self.mean;
        -0.5 * (dim * LN_2PI + self.log_det + self.whitened_norm_sq(&delta))
    }
}

/// Immutable mixture of full-covariance Gaussians with cached precision factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    components: Vec<Component>,
    dim: usize,
}

impl GmmModel {
    /// Assembles a model from explicit parameters.
    ///
    /// `covariances` are row-major `dim x dim` matrices. Weights must be
    /// positive and sum to one; each covariance must be symmetric positive
    /// definite.
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<RowMatrix>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Parameter(
                "a mixture needs at least one component".into(),
            ));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::Parameter(format!(
                "{k} weights but {} means and {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        let dim = means[0].len();
        let comps = weights
            .into_iter()
            .zip(means)
            .zip(covariances)
            .map(|((w, mu), cov)| {
                if mu.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: mu.len(),
                    });
                }
                if cov.shape() != (dim, dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: cov.rows(),
                    });
                }
                Ok((
                    w,
                    DVector::from_vec(mu),
                    DMatrix::from_row_slice(dim, dim, cov.as_slice()),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(comps)
    }

    pub(crate) fn from_parts(parts: Vec<(f64, DVector<f64>, DMatrix<f64>)>) -> Result<Self> {
        let dim = parts.first().map_or(0, |p| p.1.len());
        if dim == 0 {
            return Err(Error::Parameter(
                "feature dimension must be positive".into(),
            ));
        }
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if parts.iter().any(|p| p.0.is_nan() || p.0 <= 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "mixture weights must be positive and sum to 1 (sum = {total})"
            )));
        }
        for (i, (_, _, cov)) in parts.iter().enumerate() {
            let scale = cov.amax().max(f64::MIN_POSITIVE);
            if (cov - cov.transpose()).amax() > 1e-12 * scale {
                return Err(Error::Parameter(format!("covariance {i} is not symmetric")));
            }
        }
        let components = parts
            .into_iter()
            .enumerate()
            .map(|(i, (w, mu, cov))| Component::new(i, w, mu, cov))
            .collect::<Result<_>>()?;
        Ok(Self { components, dim })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        self.components[k].mean.as_slice()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.mean.as_slice().to_vec())
            .collect()
    }

    /// Row-major copy of component `k`'s covariance.
    pub fn covariance(&self, k: usize) -> RowMatrix {
        let cov = &self.components[k].covariance;
        let mut out = RowMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, cov[(i, j)]);
            }
        }
        out
    }

    /// Lower-triangular `W_k` with `Sigma_k^-1 = W_k^T W_k`.
    pub fn precision_factor(&self, k: usize) -> &DMatrix<f64> {
        &self.components[k].precision_factor
    }

    pub(crate) fn covariance_raw(&self, k: usize) -> &DMatrix<f64> {
        &self.components[k].covariance
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `log N(x | mu_k, Sigma_k)` for the zero-based component `k`.
    pub fn component_log_density(&self, k: usize, x: &[f64]) -> Result<f64> {
        let comp = self.components.get(k).ok_or(Error::ComponentOutOfRange {
            index: k,
            count: self.components.len(),
        })?;
        self.check_dim(x)?;
        Ok(comp.log_density(&DVector::from_column_slice(x)))
    }

    /// Negative log-likelihood of the best-matching component.
    pub fn anomaly_score(&self, x: &[f64]) -> Result<AnomalyScore> {
        self.anomaly_score_with(x, ScoringRule::BestComponent)
    }

    pub fn anomaly_score_with(&self, x: &[f64], rule: ScoringRule) -> Result<AnomalyScore> {
        self.check_dim(x)?;
        let x = DVector::from_column_slice(x);
        let best = self
            .components
            .iter()
            .map(|c| match rule {
                ScoringRule::BestComponent => c.log_density(&x),
                ScoringRule::BestWeightedComponent => c.weight.ln() + c.log_density(&x),
            })
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(AnomalyScore(-best))
    }

    /// `min_k sqrt((y1 - y2)^T Sigma_k^-1 (y1 - y2))`.
    pub fn mahalanobis_metric(&self, y1: &[f64], y2: &[f64]) -> Result<f64> {
        self.check_dim(y1)?;
        self.check_dim(y2)?;
        let delta = DVector::from_iterator(self.dim, y1.iter().zip(y2).map(|(a, b)| a - b));
        Ok(self.min_whitened_norm(&delta))
    }

    fn min_whitened_norm(&self, delta: &DVector<f64>) -> f64 {
        self.components
            .iter()
            .map(|c| c.whitened_norm_sq(delta))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Pairwise [`mahalanobis_metric`](Self::mahalanobis_metric) matrix.
    pub fn distance_matrix<V: AsRef<[f64]>>(&self, features: &[V]) -> Result<RowMatrix> {
        for f in features {
            self.check_dim(f.as_ref())?;
        }
        let n = features.len();
        let mut out = RowMatrix::zeros(n, n);
        for (i, a) in features.iter().enumerate() {
            for (j, b) in features.iter().enumerate().skip(i + 1) {
                let d = self.mahalanobis_metric(a.as_ref(), b.as_ref())?;
                out.set(i, j, d);
                out.set(j, i, d);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eye(dim: usize, scale: f64) -> RowMatrix {
        let mut m = RowMatrix::zeros(dim, dim);
        for i in 0..dim {
            m.set(i, i, scale);
        }
        m
    }

    fn single(mean: Vec<f64>, cov: RowMatrix) -> GmmModel {
        GmmModel::new(vec![1.0], vec![mean], vec![cov]).unwrap()
    }

    #[test]
    fn closed_form_densities() {
        let std2 = single(vec![0.0, 0.0], eye(2, 1.0));
        let at_mean = std2.component_log_density(0, &[0.0, 0.0]).unwrap();
        assert!((at_mean - (-(2.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
        assert!((at_mean + 1.837877).abs() < 1e-6);
        let off = std2.component_log_density(0, &[1.0, 0.0]).unwrap();
        assert!((off - (at_mean - 0.5)).abs() < 1e-12);

        let wide = single(vec![0.0], eye(1, 4.0));
        let v = wide.component_log_density(0, &[0.0]).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * 4f64.ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v + 1.612086).abs() < 1e-6);
    }

    #[test]
    fn component_index_checked() {
        let m = single(vec![0.0], eye(1, 1.0));
        assert!(matches!(
            m.component_log_density(1, &[0.0]),
            Err(Error::ComponentOutOfRange { index: 1, count: 1 })
        ));
    }

    #[test]
    fn scores() {
        let m = single(vec![0.0, 0.0], eye(2, 1.0));
        let s = m.anomaly_score(&[0.0, 0.0]).unwrap().value();
        assert!((s - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        assert_eq!(s, -m.component_log_density(0, &[0.0, 0.0]).unwrap());

        let twins = GmmModel::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![eye(2, 1.0), eye(2, 1.0)],
        )
        .unwrap();
        assert_eq!(
            twins.anomaly_score(&[0.3, -1.0]).unwrap(),
            m.anomaly_score(&[0.3, -1.0]).unwrap()
        );

        let apart = GmmModel::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![10.0, 0.0]],
            vec![eye(2, 1.0), eye(2, 1.0)],
        )
        .unwrap();
        let s = apart.anomaly_score(&[10.0, 0.0]).unwrap().value();
        assert!((s - 1.837877).abs() < 1e-6);
        let weighted = apart
            .anomaly_score_with(&[10.0, 0.0], ScoringRule::BestWeightedComponent)
            .unwrap()
            .value();
        assert!((weighted - (s - 0.5f64.ln())).abs() < 1e-12);
        assert!(matches!(
            apart.anomaly_score(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn metric_examples() {
        let m = single(vec![0.0, 0.0], eye(2, 1.0));
        assert_eq!(m.mahalanobis_metric(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(m.mahalanobis_metric(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        let two = GmmModel::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![eye(2, 1.0), eye(2, 0.25)],
        )
        .unwrap();
        assert!((two.mahalanobis_metric(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let only_tight = single(vec![0.0, 0.0], eye(2, 0.25));
        assert!(
            (only_tight
                .mahalanobis_metric(&[1.0, 0.0], &[0.0, 0.0])
                .unwrap()
                - 2.0)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn distance_matrix_small() {
        let m = single(vec![0.0, 0.0], eye(2, 1.0));
        let one = m.distance_matrix(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(one.as_slice(), &[0.0]);
        let two = m
            .distance_matrix(&[vec![0.0, 0.0], vec![3.0, 4.0]])
            .unwrap();
        assert_eq!(two.as_slice(), &[0.0, 5.0, 5.0, 0.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GmmModel::new(vec![0.7], vec![vec![0.0]], vec![eye(1, 1.0)]).is_err());
        assert!(matches!(
            GmmModel::new(vec![1.0], vec![vec![0.0, 0.0]], vec![eye(2, 0.0)]),
            Err(Error::SingularCovariance { component: 0 })
        ));
        let asym = RowMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]);
        assert!(GmmModel::new(vec![1.0], vec![vec![0.0, 0.0]], vec![asym]).is_err());
    }

    fn spd_model() -> impl Strategy<Value = GmmModel> {
        proptest::collection::vec(-1.0f64..1.0, 9).prop_map(|a| {
            // A A^T + I is SPD.
            let a = DMatrix::from_row_slice(3, 3, &a);
            let cov = &a * a.transpose() + DMatrix::identity(3, 3);
            let mut rm = RowMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    rm.set(i, j, cov[(i, j)]);
                }
            }
            single(vec![0.0; 3], rm)
        })
    }

    fn point() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn single_component_metric_axioms(m in spd_model(), a in point(), b in point(), c in point()) {
            let ab = m.mahalanobis_metric(&a, &b).unwrap();
            let ba = m.mahalanobis_metric(&b, &a).unwrap();
            let bc = m.mahalanobis_metric(&b, &c).unwrap();
            let ac = m.mahalanobis_metric(&a, &c).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(m.mahalanobis_metric(&a, &a).unwrap(), 0.0);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }

        #[test]
        fn quadratic_growth(m in spd_model(), x in point(), t in 0.1f64..5.0) {
            // log N(mu + t d) = log N(mu) - t^2/2 * d^T Sigma^-1 d
            let base = m.anomaly_score(&[0.0; 3]).unwrap().value();
            let scaled: Vec<f64> = x.iter().map(|v| v * t).collect();
            let d2 = m.mahalanobis_metric(&x, &[0.0; 3]).unwrap().powi(2);
            let s = m.anomaly_score(&scaled).unwrap().value();
            prop_assert!((s - base - 0.5 * t * t * d2).abs() < 1e-8 * (1.0 + s.abs()));
        }
    }
}
