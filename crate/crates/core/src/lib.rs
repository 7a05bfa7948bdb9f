//! Anomalous sound detection with time-weighted frequency representations
//! (TWFR) and Gaussian mixture models.
//!
//! A clip becomes a log-Mel spectrogram ([`dsp`]), each Mel band is sorted
//! and pooled over time with geometric rank weights ([`twfr`]), and the
//! resulting vectors are modelled per section with a full-covariance GMM
//! ([`gmm`]). The anomaly score of a clip is the negative log-density of its
//! best-matching component. [`smote`] can oversample scarce target-domain
//! vectors before fitting, and [`eval`] computes AUC and partial AUC.
//! [`pipeline`] ties these together over a dataset directory.
//!
//! ```
//! use twfr_gmm::dsp::LogMelSpectrogram;
//! use twfr_gmm::gmm::{fit_gmm, FitOptions};
//! use twfr_gmm::twfr::gwrp;
//!
//! let specs = [
//!     vec![vec![-20.0, -30.0, -25.0], vec![-50.0, -45.0, -55.0]],
//!     vec![vec![-22.0, -28.0, -27.0], vec![-52.0, -47.0, -51.0]],
//!     vec![vec![-21.0, -31.0, -24.0], vec![-49.0, -46.0, -53.0]],
//! ];
//! let features: Vec<Vec<f64>> = specs
//!     .iter()
//!     .map(|rows| gwrp(&LogMelSpectrogram::from_rows(rows).unwrap(), 0.5).unwrap().into_vec())
//!     .collect();
//! let model = fit_gmm(&features, &FitOptions::default()).unwrap();
//! let typical = model.anomaly_score(&features[0]).unwrap();
//! let odd = model.anomaly_score(&[0.0, 0.0]).unwrap();
//! assert!(odd > typical);
//! ```

pub mod dsp;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod matrix;
pub mod pipeline;
pub mod smote;
pub mod synth;
pub mod twfr;

pub use error::{Error, Result};
pub use gmm::{AnomalyScore, GmmModel};
pub use matrix::RowMatrix;

// Book chapters are compiled as doctests so their snippets stay current.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/front-end.md")]
mod book_front_end {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pooling.md")]
mod book_pooling {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scoring.md")]
mod book_scoring {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/smote.md")]
mod book_smote {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evaluation.md")]
mod book_evaluation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pipeline.md")]
mod book_pipeline {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
