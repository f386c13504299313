//! Covariates, online one-step-ahead forecasting with and without the HMM
//! latent label, the mixture forecaster, and MAPE scoring.

mod pipeline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ConsumptionSeries;
use crate::hmm::HmmFitConfig;
use crate::regressors::RegressorSpec;
use crate::time::Hour;
use crate::{CgmmError, HmmError, RegressError};

pub use pipeline::{
    fit_forecaster, fit_latent, forecast_baseline, forecast_cgmm, forecast_hmm, run_forecast, FittedForecaster,
    ForecastRun, LatentFit, Prediction, Predictor, FORECAST_HEADER,
};

/// Number of lagged consumptions and temperatures.
pub const N_LAGS: usize = 5;
pub const BASE_DIM: usize = 2 * N_LAGS + 24;
pub const LATENT_DIM: usize = BASE_DIM + 24;
/// Truth values below this magnitude are left out of the MAPE.
pub const MAPE_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForecastError {
    #[error("need {needed} hours of history before index {index}")]
    InsufficientHistory { index: usize, needed: usize },
    #[error("test frame starting {test_start} does not follow training frame ending {train_end}")]
    NotContiguous { train_end: Hour, test_start: Hour },
    #[error("training window ends {train_end}, at or after the first target {first_target}")]
    TrainingOverlap { train_end: Hour, first_target: Hour },
    #[error("{0} is outside the frame")]
    OutOfFrame(Hour),
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("MAPE undefined: all {0} truth values are zero")]
    UndefinedMape(usize),
    #[error("MAPE of an empty sample")]
    EmptyMape,
    #[error("unknown method {0:?}; expected one of ols, knn, svr, dt, ols+hmm, knn+hmm, svr+hmm, dt+hmm, cgmm or all")]
    UnknownMethod(String),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Cgmm(#[from] CgmmError),
}

/// A contiguous hourly record of consumption and standardised temperature.
/// Unlike [`ConsumptionSeries`] the consumption may leave [0, 1], as it does
/// once synthetic reductions are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub start: Hour,
    pub consumption: Vec<f64>,
    pub temperature: Vec<f64>,
}

impl Frame {
    pub fn new(start: Hour, consumption: Vec<f64>, temperature: Vec<f64>) -> Result<Self, ForecastError> {
        if consumption.len() != temperature.len() {
            return Err(ForecastError::LengthMismatch(consumption.len(), temperature.len()));
        }
        Ok(Self {
            start,
            consumption,
            temperature,
        })
    }

    pub fn from_series(series: &ConsumptionSeries) -> Self {
        Self {
            start: series.start(),
            consumption: series.consumption(),
            temperature: series.temperature(),
        }
    }

    pub fn len(&self) -> usize {
        self.consumption.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consumption.is_empty()
    }

    pub fn time(&self, i: usize) -> Hour {
        self.start.offset(i as i64)
    }

    /// Last covered hour; for an empty frame, the hour before `start`.
    pub fn end(&self) -> Hour {
        self.start.offset(self.len() as i64 - 1)
    }

    pub fn index_of(&self, t: Hour) -> Option<usize> {
        let i = t.0 - self.start.0;
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            start: self.time(range.start),
            consumption: self.consumption[range.clone()].to_vec(),
            temperature: self.temperature[range].to_vec(),
        }
    }

    /// The first `n` hours and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        (self.slice(0..n), self.slice(n..self.len()))
    }

    /// `self` followed by `next`, which must start the hour after `self` ends.
    pub fn concat(&self, next: &Frame) -> Result<Self, ForecastError> {
        if next.start != self.end().offset(1) {
            return Err(ForecastError::NotContiguous {
                train_end: self.end(),
                test_start: next.start,
            });
        }
        let mut out = self.clone();
        out.consumption.extend_from_slice(&next.consumption);
        out.temperature.extend_from_slice(&next.temperature);
        Ok(out)
    }
}

/// Regression inputs for one target hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateVector {
    /// Most recent first.
    pub lag_consumption: [f64; N_LAGS],
    pub lag_temperature: [f64; N_LAGS],
    pub hour: u8,
    pub latent: Option<u8>,
}

impl CovariateVector {
    pub fn dim(&self) -> usize {
        if self.latent.is_some() {
            LATENT_DIM
        } else {
            BASE_DIM
        }
    }

    /// Lags, hour one-hot, then (with a latent label) the hour one-hot times
    /// the label.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.lag_consumption);
        v.extend_from_slice(&self.lag_temperature);
        let h = self.hour as usize;
        v.extend((0..24).map(|i| if i == h { 1.0 } else { 0.0 }));
        if let Some(l) = self.latent {
            v.extend((0..24).map(|i| if i == h { f64::from(l) } else { 0.0 }));
        }
        v
    }
}

/// Covariates for position `t` of `frame`.
pub fn covariates_at(frame: &Frame, t: usize, latent: Option<u8>) -> Result<CovariateVector, ForecastError> {
    if t < N_LAGS || t > frame.len() {
        return Err(ForecastError::InsufficientHistory {
            index: t,
            needed: N_LAGS,
        });
    }
    let mut c = [0.0; N_LAGS];
    let mut temp = [0.0; N_LAGS];
    for k in 0..N_LAGS {
        c[k] = frame.consumption[t - 1 - k];
        temp[k] = frame.temperature[t - 1 - k];
    }
    Ok(CovariateVector {
        lag_consumption: c,
        lag_temperature: temp,
        hour: frame.time(t).hour_of_day(),
        latent,
    })
}

/// Covariates for hour `t`, which must have five covered hours before it.
pub fn build_covariates(frame: &Frame, t: Hour, latent: Option<u8>) -> Result<CovariateVector, ForecastError> {
    let i = t.0 - frame.start.0;
    if i < N_LAGS as i64 || i > frame.len() as i64 {
        return Err(ForecastError::InsufficientHistory {
            index: i.max(0) as usize,
            needed: N_LAGS,
        });
    }
    covariates_at(frame, i as usize, latent)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapeResult {
    /// Percent.
    pub value: f64,
    pub included: usize,
    pub excluded: usize,
}

/// Mean absolute percentage error in percent, skipping (and counting) truth
/// values with magnitude below [`MAPE_ZERO`].
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<MapeResult, ForecastError> {
    if pred.len() != truth.len() {
        return Err(ForecastError::LengthMismatch(pred.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(ForecastError::EmptyMape);
    }
    let mut sum = 0.0;
    let mut included = 0;
    for (p, v) in pred.iter().zip(truth) {
        if v.abs() < MAPE_ZERO {
            continue;
        }
        sum += ((p - v) / v).abs();
        included += 1;
    }
    if included == 0 {
        return Err(ForecastError::UndefinedMape(truth.len()));
    }
    Ok(MapeResult {
        value: sum / included as f64 * 100.0,
        included,
        excluded: truth.len() - included,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ols,
    Knn,
    Svr,
    Dt,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Ols, Family::Knn, Family::Svr, Family::Dt];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ols => "ols",
            Family::Knn => "knn",
            Family::Svr => "svr",
            Family::Dt => "dt",
        }
    }
}

/// One of the nine forecasting methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Baseline(Family),
    Latent(Family),
    Cgmm,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Baseline(Family::Ols),
        Method::Baseline(Family::Knn),
        Method::Baseline(Family::Svr),
        Method::Baseline(Family::Dt),
        Method::Latent(Family::Ols),
        Method::Latent(Family::Knn),
        Method::Latent(Family::Svr),
        Method::Latent(Family::Dt),
        Method::Cgmm,
    ];

    pub fn uses_hmm(self) -> bool {
        matches!(self, Method::Latent(_))
    }

    pub fn family(self) -> Option<Family> {
        match self {
            Method::Baseline(f) | Method::Latent(f) => Some(f),
            Method::Cgmm => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            Method::Baseline(f) => f.name().to_string(),
            Method::Latent(f) => format!("{}+hmm", f.name()),
            Method::Cgmm => "cgmm".to_string(),
        }
    }

    /// Parses a comma-separated list; `all` expands to every method.
    pub fn parse_list(s: &str) -> Result<Vec<Method>, ForecastError> {
        let mut out: Vec<Method> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Method::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err(ForecastError::UnknownMethod(s.to_string()));
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|m| seen.insert(*m));
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| ForecastError::UnknownMethod(s.to_string()))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hyperparameter grids for cross-validation; empty grids keep the
/// configured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub knn_k: Vec<usize>,
    pub svr_c: Vec<f64>,
    pub svr_epsilon: Vec<f64>,
    pub tree_max_depth: Vec<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            knn_k: vec![5, 10, 20, 40],
            svr_c: vec![0.1, 1.0, 10.0],
            svr_epsilon: vec![0.01, 0.05],
            tree_max_depth: vec![6, 8, 10, 12, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub seed: u64,
    pub knn_k: usize,
    pub knn_standardize: bool,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    /// `None` means `1 / d`.
    pub svr_gamma: Option<f64>,
    pub tree_max_depth: usize,
    pub tree_min_samples_leaf: usize,
    /// Mixture components.
    pub k: usize,
    /// EM tolerance on the log-likelihood gain, for both latent models.
    pub tol: f64,
    pub max_iter: usize,
    pub hmm_same_level_bias: f64,
    pub hmm_jitter: f64,
    pub cv: Option<CvConfig>,
    /// Refit the regressor after every test step.
    pub online_update: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        let hmm = HmmFitConfig::default();
        Self {
            seed: 0,
            knn_k: 10,
            knn_standardize: false,
            svr_c: 1.0,
            svr_epsilon: 0.01,
            svr_gamma: None,
            tree_max_depth: 12,
            tree_min_samples_leaf: 5,
            k: crate::cgmm::DEFAULT_COMPONENTS,
            tol: crate::cgmm::DEFAULT_TOL,
            max_iter: crate::cgmm::DEFAULT_MAX_ITER,
            hmm_same_level_bias: hmm.same_level_bias,
            hmm_jitter: hmm.jitter,
            cv: None,
            online_update: false,
        }
    }
}

impl ForecastConfig {
    /// The configured (not cross-validated) spec for a family.
    pub fn spec(&self, family: Family) -> RegressorSpec {
        match family {
            Family::Ols => RegressorSpec::Ols,
            Family::Knn => RegressorSpec::Knn {
                k: self.knn_k,
                standardize: self.knn_standardize,
            },
            Family::Svr => RegressorSpec::Svr {
                c: self.svr_c,
                epsilon: self.svr_epsilon,
                gamma: self.svr_gamma,
            },
            Family::Dt => RegressorSpec::Tree {
                max_depth: self.tree_max_depth,
                min_samples_leaf: self.tree_min_samples_leaf,
            },
        }
    }

    /// Candidate specs for cross-validation.
    pub fn grid(&self, family: Family) -> Vec<RegressorSpec> {
        let Some(cv) = &self.cv else {
            return vec![self.spec(family)];
        };
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        match family {
            Family::Ols => vec![RegressorSpec::Ols],
            Family::Knn => {
                let ks = if cv.knn_k.is_empty() {
                    vec![self.knn_k]
                } else {
                    cv.knn_k.clone()
                };
                ks.into_iter()
                    .map(|k| RegressorSpec::Knn {
                        k,
                        standardize: self.knn_standardize,
                    })
                    .collect()
            }
            Family::Svr => {
                let mut out = Vec::new();
                for c in or(&cv.svr_c, self.svr_c) {
                    for epsilon in or(&cv.svr_epsilon, self.svr_epsilon) {
                        out.push(RegressorSpec::Svr {
                            c,
                            epsilon,
                            gamma: self.svr_gamma,
                        });
                    }
                }
                out
            }
            Family::Dt => {
                let ds = if cv.tree_max_depth.is_empty() {
                    vec![self.tree_max_depth]
                } else {
                    cv.tree_max_depth.clone()
                };
                ds.into_iter()
                    .map(|max_depth| RegressorSpec::Tree {
                        max_depth,
                        min_samples_leaf: self.tree_min_samples_leaf,
                    })
                    .collect()
            }
        }
    }

    pub fn hmm_config(&self) -> HmmFitConfig {
        HmmFitConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: crate::rng::derive_seed(self.seed, &["hmm"]),
            same_level_bias: self.hmm_same_level_bias,
            jitter: self.hmm_jitter,
        }
    }

    pub fn cgmm_config(&self) -> crate::cgmm::CgmmConfig {
        crate::cgmm::CgmmConfig {
            components: self.k,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: crate::rng::derive_seed(self.seed, &["cgmm"]),
        }
    }
}
