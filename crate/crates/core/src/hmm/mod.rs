//! Gaussian-emission hidden Markov models over a masked state space.
//!
//! The engine is generic in the number of states. The canonical instance is
//! the 38-state hour-of-day chain from [`build_state_space`]: two levels
//! (High, Low) for hours 6 to 19, one state for every other hour, and
//! transitions only into the next hour's states. For hour-tagged spaces the
//! states considered at time `t` are those of the observation's wall-clock
//! hour; an untagged space (see [`StateSpace::fully_connected`]) uses every
//! state at every step.

mod engine;
mod fit;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use engine::{
    backward, filter, forward, posteriors, posteriors_summary, predict_state, smooth, BackwardPass, ForwardPass,
    OnlineFilter, PosteriorTable,
};
pub use fit::{
    baum_welch_step, expected_complete_log_likelihood, fit_hmm, fit_hmm_from, fit_hmm_values, init_params,
    init_params_values, BaumWelchStep, HmmFitConfig, MIN_DAYS, VARIANCE_FLOOR,
};

/// First and one-past-last hour with two levels.
pub const DUAL_HOURS: std::ops::Range<u8> = 6..20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HmmError {
    #[error("observation sequence is empty")]
    EmptySequence,
    #[error("sequence has zero likelihood at index {index}")]
    ZeroLikelihood { index: usize },
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("time index {index} outside 0..={last}")]
    IndexOutOfRange { index: usize, last: usize },
    #[error("distribution puts mass {mass:e} on states outside hour {hour}")]
    Inconsistent { hour: u8, mass: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Single,
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDescriptor {
    /// Wall-clock hour, or `None` in an untagged space.
    pub hour: Option<u8>,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub states: Vec<StateDescriptor>,
    /// `mask[i][j]` allows the transition i -> j.
    pub mask: Vec<Vec<bool>>,
}

/// The 38-state hourly chain, hours ascending with High before Low.
pub fn build_state_space() -> StateSpace {
    let mut states = Vec::with_capacity(38);
    for h in 0..24u8 {
        if DUAL_HOURS.contains(&h) {
            states.push(StateDescriptor {
                hour: Some(h),
                level: Level::High,
            });
            states.push(StateDescriptor {
                hour: Some(h),
                level: Level::Low,
            });
        } else {
            states.push(StateDescriptor {
                hour: Some(h),
                level: Level::Single,
            });
        }
    }
    let mask = states
        .iter()
        .map(|from| {
            let next = (from.hour.unwrap() + 1) % 24;
            states.iter().map(|to| to.hour == Some(next)).collect()
        })
        .collect();
    StateSpace { states, mask }
}

impl StateSpace {
    /// `m` untagged states with every transition allowed.
    pub fn fully_connected(m: usize) -> Self {
        Self {
            states: vec![
                StateDescriptor {
                    hour: None,
                    level: Level::Single,
                };
                m
            ],
            mask: vec![vec![true; m]; m],
        }
    }

    /// Untagged states with an explicit mask.
    pub fn with_mask(mask: Vec<Vec<bool>>) -> Self {
        let mut s = Self::fully_connected(mask.len());
        s.mask = mask;
        s
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_hourly(&self) -> bool {
        self.states.iter().all(|s| s.hour.is_some())
    }

    /// States that can be occupied at wall-clock `hour`.
    pub fn support(&self, hour: u8) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.states[i].hour.is_none_or(|h| h == hour))
            .collect()
    }

    /// Index of the (hour, level) state, if present.
    pub fn index(&self, hour: u8, level: Level) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.hour == Some(hour) && s.level == level)
    }

    pub fn successors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.mask[i][j]).collect()
    }
}

/// Transition matrix, Gaussian emissions and initial distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub space: StateSpace,
    pub transitions: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub initial: Vec<f64>,
}

impl HmmModel {
    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    /// Checks shapes, stochasticity (within `tol`), the mask and variances.
    pub fn validate(&self, tol: f64) -> Result<(), HmmError> {
        let m = self.n_states();
        let bad = |msg: String| Err(HmmError::InvalidModel(msg));
        if m == 0 {
            return bad("no states".into());
        }
        if self.space.mask.len() != m
            || self.transitions.len() != m
            || self.means.len() != m
            || self.variances.len() != m
            || self.initial.len() != m
        {
            return bad("parameter shapes disagree with the state space".into());
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row.len() != m || self.space.mask[i].len() != m {
                return bad(format!("transition row {i} has the wrong length"));
            }
            for (j, &a) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&a) {
                    return bad(format!("a[{i}][{j}] = {a} is not a probability"));
                }
                if a != 0.0 && !self.space.mask[i][j] {
                    return bad(format!("a[{i}][{j}] = {a} on a forbidden transition"));
                }
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > tol {
                return bad(format!("transition row {i} does not sum to 1"));
            }
        }
        if (self.initial.iter().sum::<f64>() - 1.0).abs() > tol || self.initial.iter().any(|p| *p < 0.0) {
            return bad("initial distribution is not a probability vector".into());
        }
        if self.variances.iter().any(|v| !(*v > 0.0)) || self.means.iter().any(|m| !m.is_finite()) {
            return bad("emission parameters must be finite with positive variance".into());
        }
        Ok(())
    }

    /// Draws a state path and observations of length `len`.
    pub fn sample<R: Rng>(&self, len: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>) {
        fn draw<R: Rng>(p: &[f64], rng: &mut R) -> usize {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return i;
                }
            }
            p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
        }
        let mut states = Vec::with_capacity(len);
        let mut ys = Vec::with_capacity(len);
        let mut q = draw(&self.initial, rng);
        for t in 0..len {
            if t > 0 {
                q = draw(&self.transitions[q], rng);
            }
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            states.push(q);
            ys.push(self.means[q] + self.variances[q].sqrt() * z);
        }
        (states, ys)
    }
}

/// Binary label from a distribution over states at wall-clock `hour`:
/// 1 when the hour's High state carries at least half the mass, 0 otherwise,
/// and always 1 for single-state hours.
pub fn latent_label(dist: &[f64], space: &StateSpace, hour: u8) -> Result<u8, HmmError> {
    let off: f64 = dist
        .iter()
        .zip(&space.states)
        .filter(|(_, s)| s.hour.is_some_and(|h| h != hour))
        .map(|(p, _)| *p)
        .sum();
    if off > 1e-6 {
        return Err(HmmError::Inconsistent { hour, mass: off });
    }
    Ok(match space.index(hour, Level::High) {
        Some(h) if dist[h] < 0.5 => 0,
        _ => 1,
    })
}
