//! Latent-variable short-term load forecasting and demand-response
//! reduction estimation for hourly smart-meter data.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] ingests meter and temperature CSVs, filters users, aligns and
//!   scales each consumption series and runs an augmented Dickey-Fuller test.
//! * [`regressors`] holds the baseline learners (OLS, KNN, epsilon-SVR and a
//!   CART regression tree) plus contiguous-fold cross-validation.
//! * [`cgmm`] fits a conditional Gaussian mixture of linear regressions by EM
//!   and predicts with nearest-neighbour responsibilities.
//! * [`hmm`] is a scaled alpha-beta engine for Gaussian-emission HMMs, with the
//!   38-state hour-of-day chain as its main instance.
//! * [`forecast`] builds covariates and runs the online prediction loops.
//! * [`causal`] turns forecasts into counterfactuals, pointwise reductions,
//!   eventwise errors and grouped summaries.
//!
//! [`synthetic`] generates two-regime households for experiments and
//! [`batch`] fans independent work out over rayon when the `parallel`
//! feature is on, falling back to a plain loop otherwise.

// `!(x > 0.0)` style checks are kept so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod batch;
pub mod causal;
pub mod cgmm;
pub mod data;
pub mod forecast;
pub mod hmm;
pub mod linalg;
pub mod regressors;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod time;

pub use causal::CausalError;
pub use cgmm::CgmmError;
pub use data::DataError;
pub use forecast::ForecastError;
pub use hmm::HmmError;
pub use regressors::RegressError;
pub use time::Hour;

/// Expectation-maximisation trace shared by the mixture and HMM fits.
///
/// `log_likelihood[0]` is the observed-data log-likelihood at the initial
/// parameters; entry `i` is the value after iteration `i`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmTrace {
    pub log_likelihood: Vec<f64>,
    /// Expected complete log-likelihood evaluated with the responsibilities
    /// of each E-step. Kept for reporting; it is not monotone in general.
    pub expected_complete: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl EmTrace {
    /// Largest single-step decrease of the log-likelihood (0 if monotone).
    pub fn max_decrease(&self) -> f64 {
        self.log_likelihood.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.max_decrease() <= slack
    }
}
