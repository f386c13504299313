use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{covariates_at, mape, Family, ForecastConfig, ForecastError, Frame, MapeResult, Method, N_LAGS};
use crate::batch::Exec;
use crate::cgmm::{fit_cgmm, CgmmModel};
use crate::hmm::{fit_hmm_values, latent_label, posteriors_summary, HmmModel, OnlineFilter};
use crate::regressors::{cross_validate, DesignMatrix, FittedRegressor, RegressorSpec};
use crate::time::Hour;
use crate::EmTrace;

/// A fitted hourly HMM with the rounded labels of its training hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentFit {
    pub model: HmmModel,
    pub trace: EmTrace,
    pub start: Hour,
    /// Smoothed labels; the last one is the filtered label.
    pub labels: Vec<u8>,
}

/// Fits the HMM on the training frame and labels every training hour.
pub fn fit_latent(train: &Frame, config: &ForecastConfig) -> Result<LatentFit, ForecastError> {
    let hour = train.start.hour_of_day();
    let (model, trace) = fit_hmm_values(&train.consumption, hour, &config.hmm_config())?;
    let post = posteriors_summary(&model, &train.consumption, hour)?;
    let labels = post
        .marginals
        .iter()
        .enumerate()
        .map(|(t, g)| latent_label(g, &model.space, train.time(t).hour_of_day()))
        .collect::<Result<Vec<u8>, _>>()?;
    Ok(LatentFit {
        model,
        trace,
        start: train.start,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Regressor(FittedRegressor),
    Cgmm(CgmmModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub timestamp: Hour,
    pub y_pred: f64,
    pub latent_label: Option<u8>,
}

/// A forecaster trained on one window, ready to predict later hours.
#[derive(Debug, Clone)]
pub struct FittedForecaster {
    pub method: Method,
    pub train_start: Hour,
    pub train_end: Hour,
    /// Hyperparameters used, after cross-validation.
    pub spec: Option<RegressorSpec>,
    pub predictor: Predictor,
    pub latent: Option<LatentFit>,
    pub cgmm_trace: Option<EmTrace>,
    training: DesignMatrix,
    config: ForecastConfig,
}

fn design(train: &Frame, labels: Option<&[u8]>) -> Result<DesignMatrix, ForecastError> {
    if train.len() <= N_LAGS {
        return Err(ForecastError::InsufficientHistory {
            index: train.len(),
            needed: N_LAGS + 1,
        });
    }
    let rows = (N_LAGS..train.len())
        .map(|t| covariates_at(train, t, labels.map(|l| l[t])).map(|x| x.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DesignMatrix::new(&rows, train.consumption[N_LAGS..].to_vec())?)
}

/// Trains `method` on `train`. A latent fit for the same frame can be passed
/// in to share one HMM between several methods.
pub fn fit_forecaster(
    method: Method,
    train: &Frame,
    config: &ForecastConfig,
    latent: Option<&LatentFit>,
) -> Result<FittedForecaster, ForecastError> {
    let latent = if method.uses_hmm() {
        match latent {
            Some(l) if l.start == train.start && l.labels.len() == train.len() => Some(l.clone()),
            _ => Some(fit_latent(train, config)?),
        }
    } else {
        None
    };
    let data = design(train, latent.as_ref().map(|l| l.labels.as_slice()))?;
    let (spec, predictor, cgmm_trace) = match method.family() {
        Some(family) => {
            let spec = choose_spec(family, &data, config)?;
            (Some(spec), Predictor::Regressor(spec.fit(&data)?), None)
        }
        None => {
            let (model, trace) = fit_cgmm(&data, &config.cgmm_config())?;
            (None, Predictor::Cgmm(model), Some(trace))
        }
    };
    Ok(FittedForecaster {
        method,
        train_start: train.start,
        train_end: train.end(),
        spec,
        predictor,
        latent,
        cgmm_trace,
        training: data,
        config: config.clone(),
    })
}

fn choose_spec(family: Family, data: &DesignMatrix, config: &ForecastConfig) -> Result<RegressorSpec, ForecastError> {
    let grid = config.grid(family);
    match (&config.cv, grid.len()) {
        (Some(cv), n) if n > 1 => Ok(cross_validate(data, &grid, cv.folds, Exec::Sequential)?.best),
        _ => Ok(grid[0]),
    }
}

impl FittedForecaster {
    pub fn training(&self) -> &DesignMatrix {
        &self.training
    }

    fn predict_x(&self, x: &[f64]) -> Result<f64, ForecastError> {
        Ok(match &self.predictor {
            Predictor::Regressor(r) => r.predict(x)?,
            Predictor::Cgmm(m) => m.predict(x)?,
        })
    }

    fn refit(&mut self) -> Result<(), ForecastError> {
        match (&self.predictor, self.spec) {
            (Predictor::Regressor(_), Some(spec)) => {
                self.predictor = Predictor::Regressor(spec.fit(&self.training)?);
            }
            _ => {
                let (model, trace) = fit_cgmm(&self.training, &self.config.cgmm_config())?;
                self.predictor = Predictor::Cgmm(model);
                self.cgmm_trace = Some(trace);
            }
        }
        Ok(())
    }

    /// One-step-ahead predictions at positions `targets` of `frame`, which
    /// must cover the training window and everything up to the last target.
    /// Lags and the HMM filter use the frame's observed values.
    pub fn predict_targets(&self, frame: &Frame, targets: &[usize]) -> Result<Vec<Prediction>, ForecastError> {
        let mut targets = targets.to_vec();
        targets.sort_unstable();
        targets.dedup();
        let Some(&last) = targets.last() else {
            return Ok(Vec::new());
        };
        let first = frame.time(targets[0]);
        if first <= self.train_end {
            return Err(ForecastError::TrainingOverlap {
                train_end: self.train_end,
                first_target: first,
            });
        }
        if last >= frame.len() {
            return Err(ForecastError::OutOfFrame(frame.time(last)));
        }
        let begin = frame
            .index_of(self.train_start)
            .ok_or(ForecastError::OutOfFrame(self.train_start))?;
        let train_last = frame
            .index_of(self.train_end)
            .ok_or(ForecastError::OutOfFrame(self.train_end))?;
        let mut filter = match &self.latent {
            Some(l) => Some(OnlineFilter::after(
                &l.model,
                &frame.consumption[begin..=train_last],
                self.train_start.hour_of_day(),
            )?),
            None => None,
        };
        let mut online = self.config.online_update.then(|| self.clone());
        let mut out = Vec::with_capacity(targets.len());
        let mut next = 0;
        for t in train_last + 1..=last {
            if targets[next] == t {
                next += 1;
                let hour = frame.time(t).hour_of_day();
                let label = match &filter {
                    Some(f) => Some(latent_label(f.predicted(), &f.model().space, hour)?),
                    None => None,
                };
                let x = covariates_at(frame, t, label)?.to_vec();
                let y_pred = match &mut online {
                    Some(me) => {
                        let y = me.predict_x(&x)?;
                        me.training.push(&x, frame.consumption[t])?;
                        me.refit()?;
                        y
                    }
                    None => self.predict_x(&x)?,
                };
                out.push(Prediction {
                    timestamp: frame.time(t),
                    y_pred,
                    latent_label: label,
                });
            }
            if t < last {
                if let Some(f) = filter.as_mut() {
                    f.observe(frame.consumption[t])?;
                }
            }
        }
        Ok(out)
    }
}

/// Predictions over a test window, with the truth alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRun {
    pub user_id: String,
    pub method: Method,
    pub spec: Option<RegressorSpec>,
    pub timestamps: Vec<Hour>,
    pub y_true: Vec<f64>,
    pub y_pred: Vec<f64>,
    pub latent_label: Vec<Option<u8>>,
    /// `None` for an empty test window or an all-zero truth.
    pub mape: Option<MapeResult>,
}

pub const FORECAST_HEADER: &str = "timestamp,y_true,y_pred,latent_label,method";

impl ForecastRun {
    pub fn recompute_mape(&self) -> Option<MapeResult> {
        mape(&self.y_pred, &self.y_true).ok()
    }

    /// Rows without the header.
    pub fn write_rows<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let method = self.method.name();
        for i in 0..self.timestamps.len() {
            let label = self.latent_label[i].map(|l| l.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                self.timestamps[i], self.y_true[i], self.y_pred[i], label, method
            )?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{FORECAST_HEADER}")?;
        self.write_rows(w)
    }
}

/// Trains on `train` and predicts every hour of `test`, which must follow it
/// directly.
pub fn run_forecast(
    user_id: &str,
    method: Method,
    train: &Frame,
    test: &Frame,
    config: &ForecastConfig,
    latent: Option<&LatentFit>,
) -> Result<ForecastRun, ForecastError> {
    let full = train.concat(test)?;
    let fitted = fit_forecaster(method, train, config, latent)?;
    let targets: Vec<usize> = (train.len()..full.len()).collect();
    let preds = fitted.predict_targets(&full, &targets)?;
    let y_pred: Vec<f64> = preds.iter().map(|p| p.y_pred).collect();
    let mape = mape(&y_pred, &test.consumption).ok();
    Ok(ForecastRun {
        user_id: user_id.to_string(),
        method,
        spec: fitted.spec,
        timestamps: preds.iter().map(|p| p.timestamp).collect(),
        y_true: test.consumption.clone(),
        y_pred,
        latent_label: preds.iter().map(|p| p.latent_label).collect(),
        mape,
    })
}

/// The regressor with the HMM label in its covariates.
pub fn forecast_hmm(
    user_id: &str,
    train: &Frame,
    test: &Frame,
    family: Family,
    config: &ForecastConfig,
) -> Result<ForecastRun, ForecastError> {
    run_forecast(user_id, Method::Latent(family), train, test, config, None)
}

/// The regressor without a latent label.
pub fn forecast_baseline(
    user_id: &str,
    train: &Frame,
    test: &Frame,
    family: Family,
    config: &ForecastConfig,
) -> Result<ForecastRun, ForecastError> {
    run_forecast(user_id, Method::Baseline(family), train, test, config, None)
}

/// The mixture of regressions with nearest-neighbour responsibilities.
pub fn forecast_cgmm(
    user_id: &str,
    train: &Frame,
    test: &Frame,
    config: &ForecastConfig,
) -> Result<ForecastRun, ForecastError> {
    run_forecast(user_id, Method::Cgmm, train, test, config, None)
}
