//! Initialisation and Baum-Welch re-estimation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{hour_at, posteriors_with, Layout};
use super::{HmmError, HmmModel, Level, PosteriorTable, StateSpace};
use crate::data::ConsumptionSeries;
use crate::stats::{mean, normal_log_pdf, quantile, sample_variance};
use crate::EmTrace;

pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Minimum training length for the hourly chain, in days.
pub const MIN_DAYS: usize = 7;
/// Posterior weight below which a state counts as unvisited.
const UNVISITED: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmFitConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Initial probability of keeping the same level into the next hour.
    pub same_level_bias: f64,
    /// Upper bound of the uniform jitter added to allowed transitions.
    pub jitter: f64,
}

impl Default for HmmFitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
            same_level_bias: 0.7,
            jitter: 0.05,
        }
    }
}

/// Percentile-based emissions, level-biased jittered transitions and a
/// point-mass initial distribution on the first observation's hour.
pub fn init_params(
    series: &ConsumptionSeries,
    space: &StateSpace,
    config: &HmmFitConfig,
) -> Result<HmmModel, HmmError> {
    init_params_values(&series.consumption(), series.start().hour_of_day(), space, config)
}

/// [`init_params`] on raw values whose first entry falls on `start_hour`.
pub fn init_params_values(
    y: &[f64],
    start_hour: u8,
    space: &StateSpace,
    config: &HmmFitConfig,
) -> Result<HmmModel, HmmError> {
    if !space.is_hourly() {
        return Err(HmmError::InvalidModel(
            "percentile initialisation needs an hour-tagged state space".into(),
        ));
    }
    let needed = MIN_DAYS * 24;
    if y.len() < needed {
        return Err(HmmError::InsufficientData { needed, got: y.len() });
    }
    let mut by_hour: Vec<Vec<f64>> = vec![Vec::new(); 24];
    for (t, &v) in y.iter().enumerate() {
        by_hour[hour_at(start_hour, t) as usize].push(v);
    }
    let m = space.len();
    let mut means = vec![0.0; m];
    let mut variances = vec![0.0; m];
    for (i, st) in space.states.iter().enumerate() {
        let v = &by_hour[st.hour.unwrap() as usize];
        means[i] = match st.level {
            Level::High => quantile(v, 0.75),
            Level::Low => quantile(v, 0.25),
            Level::Single => mean(v),
        };
        variances[i] = sample_variance(v).max(VARIANCE_FLOOR);
    }
    let mut rng = crate::rng::seeded(config.seed);
    let mut transitions = vec![vec![0.0; m]; m];
    for (i, row) in transitions.iter_mut().enumerate() {
        let from = space.states[i].level;
        for j in space.successors(i) {
            let to = space.states[j].level;
            let base = match (from, to) {
                (Level::Single, Level::High | Level::Low) => 0.5,
                (_, Level::Single) => 1.0,
                (a, b) if a == b => config.same_level_bias,
                _ => 1.0 - config.same_level_bias,
            };
            row[j] = base + config.jitter * rng.random::<f64>();
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|a| *a /= s);
    }
    let start = space.support(start_hour);
    let mut best = start[0];
    for &i in &start[1..] {
        if (means[i] - y[0]).abs() < (means[best] - y[0]).abs() {
            best = i;
        }
    }
    let mut initial = vec![0.0; m];
    initial[best] = 1.0;
    Ok(HmmModel {
        space: space.clone(),
        transitions,
        means,
        variances,
        initial,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaumWelchStep {
    pub model: HmmModel,
    /// States whose emission parameters were held for lack of weight.
    pub unvisited_states: Vec<usize>,
    /// States whose outgoing transitions were held.
    pub held_rows: Vec<usize>,
}

/// One M-step from posteriors computed under `model` on `y`.
pub fn baum_welch_step(model: &HmmModel, y: &[f64], post: &PosteriorTable) -> BaumWelchStep {
    let m = model.n_states();
    let mut next = model.clone();
    let mut held_rows = Vec::new();
    let mut unvisited_states = Vec::new();
    next.initial = post.marginals[0].clone();
    for i in 0..m {
        let denom: f64 = post.transition_counts[i].iter().sum();
        if denom > UNVISITED {
            for j in 0..m {
                next.transitions[i][j] = if model.space.mask[i][j] {
                    post.transition_counts[i][j] / denom
                } else {
                    0.0
                };
            }
        } else {
            held_rows.push(i);
        }
        let w: f64 = post.marginals.iter().map(|g| g[i]).sum();
        if w > UNVISITED {
            let mu = post.marginals.iter().zip(y).map(|(g, v)| g[i] * v).sum::<f64>() / w;
            let var = post
                .marginals
                .iter()
                .zip(y)
                .map(|(g, v)| g[i] * (v - mu) * (v - mu))
                .sum::<f64>()
                / w;
            next.means[i] = mu;
            next.variances[i] = var.max(VARIANCE_FLOOR);
        } else {
            unvisited_states.push(i);
        }
    }
    BaumWelchStep {
        model: next,
        unvisited_states,
        held_rows,
    }
}

/// Expected complete log-likelihood of `model` under the posteriors `post`.
pub fn expected_complete_log_likelihood(model: &HmmModel, y: &[f64], post: &PosteriorTable) -> f64 {
    let m = model.n_states();
    let mut total = 0.0;
    for i in 0..m {
        let g0 = post.marginals[0][i];
        if g0 > 0.0 {
            total += g0 * model.initial[i].ln();
        }
        for j in 0..m {
            let c = post.transition_counts[i][j];
            if c > 0.0 {
                total += c * model.transitions[i][j].ln();
            }
        }
    }
    for (g, &v) in post.marginals.iter().zip(y) {
        for i in 0..m {
            if g[i] > 0.0 {
                total += g[i] * normal_log_pdf(v, model.means[i], model.variances[i]);
            }
        }
    }
    total
}

/// Baum-Welch from `init` until the log-likelihood gain falls below `tol`.
pub fn fit_hmm_from(
    init: HmmModel,
    y: &[f64],
    start_hour: u8,
    config: &HmmFitConfig,
) -> Result<(HmmModel, EmTrace), HmmError> {
    let layout = Layout::new(&init);
    let mut model = init;
    let mut post = posteriors_with(&model, &layout, y, start_hour, false)?;
    let mut trace = EmTrace {
        log_likelihood: vec![post.log_likelihood],
        expected_complete: vec![expected_complete_log_likelihood(&model, y, &post)],
        converged: false,
        iterations: 0,
    };
    while trace.iterations < config.max_iter {
        let next = baum_welch_step(&model, y, &post).model;
        let next_post = posteriors_with(&next, &layout, y, start_hour, false)?;
        trace.iterations += 1;
        trace.log_likelihood.push(next_post.log_likelihood);
        trace
            .expected_complete
            .push(expected_complete_log_likelihood(&next, y, &next_post));
        let gain = next_post.log_likelihood - post.log_likelihood;
        model = next;
        post = next_post;
        if gain < config.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((model, trace))
}

/// Fits the 38-state hourly chain to a consumption series.
pub fn fit_hmm(series: &ConsumptionSeries, config: &HmmFitConfig) -> Result<(HmmModel, EmTrace), HmmError> {
    fit_hmm_values(&series.consumption(), series.start().hour_of_day(), config)
}

/// [`fit_hmm`] on raw values whose first entry falls on `start_hour`.
pub fn fit_hmm_values(y: &[f64], start_hour: u8, config: &HmmFitConfig) -> Result<(HmmModel, EmTrace), HmmError> {
    let init = init_params_values(y, start_hour, &super::build_state_space(), config)?;
    fit_hmm_from(init, y, start_hour, config)
}
