//! Scaled alpha-beta recursions.
//!
//! `alpha_hat[t]` is the one-step predictive distribution of `q_t` given
//! `y_0..y_{t-1}` (so `alpha_hat[0]` is the initial distribution). Emission
//! densities are kept as `exp(log b - shift_t)` with `shift_t` the largest
//! log-density at step `t`, and `norm[t]` is the normaliser of
//! `alpha_hat[t] * b_tilde[t]`. The per-step log scale is
//! `ln norm[t] + shift_t`, and these sum to `log P(Y)`.

use super::{HmmError, HmmModel};
use crate::stats::normal_log_pdf;

pub(crate) fn hour_at(start_hour: u8, t: usize) -> u8 {
    ((start_hour as usize + t) % 24) as u8
}

/// Support lists per wall-clock hour plus successor lists, computed once per
/// model.
pub(crate) struct Layout {
    supports: Vec<Vec<usize>>,
    pub(crate) succ: Vec<Vec<usize>>,
}

impl Layout {
    pub(crate) fn new(model: &HmmModel) -> Self {
        Self {
            supports: (0..24).map(|h| model.space.support(h)).collect(),
            succ: (0..model.n_states()).map(|i| model.space.successors(i)).collect(),
        }
    }

    pub(crate) fn support(&self, hour: u8) -> &[usize] {
        &self.supports[hour as usize]
    }
}

/// Rescaled emission weights at one step; returns the shift.
fn emissions(model: &HmmModel, support: &[usize], y: f64, out: &mut [f64]) -> f64 {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut shift = f64::NEG_INFINITY;
    for &i in support {
        out[i] = normal_log_pdf(y, model.means[i], model.variances[i]);
        shift = shift.max(out[i]);
    }
    for &i in support {
        out[i] = (out[i] - shift).exp();
    }
    shift
}

/// One forward step: returns `(norm, filtered, next_predicted)`.
fn step(
    model: &HmmModel,
    succ: &[Vec<usize>],
    support: &[usize],
    predicted: &[f64],
    b: &[f64],
    index: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>), HmmError> {
    let m = model.n_states();
    let norm: f64 = support.iter().map(|&i| predicted[i] * b[i]).sum();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(HmmError::ZeroLikelihood { index });
    }
    let mut filtered = vec![0.0; m];
    for &i in support {
        filtered[i] = predicted[i] * b[i] / norm;
    }
    let mut next = vec![0.0; m];
    for &i in support {
        if filtered[i] == 0.0 {
            continue;
        }
        for &j in &succ[i] {
            next[j] += filtered[i] * model.transitions[i][j];
        }
    }
    Ok((norm, filtered, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub start_hour: u8,
    pub alpha_hat: Vec<Vec<f64>>,
    pub b_tilde: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
    pub norm: Vec<f64>,
    /// `ln norm[t] + shift[t]`.
    pub log_scale: Vec<f64>,
    /// Predictive distribution of the state after the last observation.
    pub predicted: Vec<f64>,
    pub log_likelihood: f64,
}

impl ForwardPass {
    /// Index of the last observation.
    pub fn last(&self) -> usize {
        self.alpha_hat.len() - 1
    }

    /// Unscaled `alpha(q_t) = P(y_0..y_{t-1}, q_t)`.
    pub fn alpha(&self, t: usize) -> Vec<f64> {
        let c: f64 = self.log_scale[..t].iter().sum::<f64>().exp();
        self.alpha_hat[t].iter().map(|a| a * c).collect()
    }

    /// `P(q_t | y_0..y_t)`.
    pub fn filtered(&self, t: usize) -> Vec<f64> {
        self.alpha_hat[t]
            .iter()
            .zip(&self.b_tilde[t])
            .map(|(a, b)| a * b / self.norm[t])
            .collect()
    }
}

/// Forward recursion over `y`, whose first value falls on wall-clock
/// `start_hour`.
pub fn forward(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<ForwardPass, HmmError> {
    forward_with(model, &Layout::new(model), y, start_hour)
}

pub(crate) fn forward_with(
    model: &HmmModel,
    layout: &Layout,
    y: &[f64],
    start_hour: u8,
) -> Result<ForwardPass, HmmError> {
    if y.is_empty() {
        return Err(HmmError::EmptySequence);
    }
    model.validate(1e-6)?;
    let m = model.n_states();
    let n = y.len();
    let mut pass = ForwardPass {
        start_hour,
        alpha_hat: Vec::with_capacity(n),
        b_tilde: Vec::with_capacity(n),
        shift: Vec::with_capacity(n),
        norm: Vec::with_capacity(n),
        log_scale: Vec::with_capacity(n),
        predicted: model.initial.clone(),
        log_likelihood: 0.0,
    };
    for (t, &yt) in y.iter().enumerate() {
        let support = layout.support(hour_at(start_hour, t));
        let mut b = vec![0.0; m];
        let shift = emissions(model, support, yt, &mut b);
        let (norm, _, next) = step(model, &layout.succ, support, &pass.predicted, &b, t)?;
        let log_scale = norm.ln() + shift;
        pass.log_likelihood += log_scale;
        pass.alpha_hat.push(std::mem::replace(&mut pass.predicted, next));
        pass.b_tilde.push(b);
        pass.shift.push(shift);
        pass.norm.push(norm);
        pass.log_scale.push(log_scale);
    }
    Ok(pass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    /// `beta(q_t)` divided by the product of the later step scales.
    pub beta_hat: Vec<Vec<f64>>,
}

impl BackwardPass {
    /// Unscaled `beta(q_t) = P(y_{t+1}..y_T | q_t)`.
    pub fn beta(&self, t: usize, fwd: &ForwardPass) -> Vec<f64> {
        let c: f64 = fwd.log_scale[t + 1..].iter().sum::<f64>().exp();
        self.beta_hat[t].iter().map(|b| b * c).collect()
    }
}

pub(crate) fn backward_with(model: &HmmModel, layout: &Layout, fwd: &ForwardPass) -> BackwardPass {
    let m = model.n_states();
    let n = fwd.alpha_hat.len();
    let mut beta_hat = vec![vec![1.0; m]; n];
    let mut w = vec![0.0; m];
    for t in (0..n - 1).rev() {
        for j in 0..m {
            w[j] = fwd.b_tilde[t + 1][j] * beta_hat[t + 1][j] / fwd.norm[t + 1];
        }
        for i in 0..m {
            beta_hat[t][i] = layout.succ[i].iter().map(|&j| model.transitions[i][j] * w[j]).sum();
        }
    }
    BackwardPass { beta_hat }
}

/// Backward recursion; runs the forward pass for the scales.
pub fn backward(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<(ForwardPass, BackwardPass), HmmError> {
    let layout = Layout::new(model);
    let fwd = forward_with(model, &layout, y, start_hour)?;
    let bwd = backward_with(model, &layout, &fwd);
    Ok((fwd, bwd))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    /// `P(q_t = i | Y)`, one row per observation.
    pub marginals: Vec<Vec<f64>>,
    /// `P(q_t = i, q_{t+1} = j | Y)` as row-major M x M blocks, when kept.
    pub pairwise: Option<Vec<Vec<f64>>>,
    /// Pairwise posteriors summed over t.
    pub transition_counts: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// `log P(Y)` recomputed from the alpha-beta product at every t.
    pub log_likelihood_by_t: Vec<f64>,
}

impl PosteriorTable {
    /// Largest relative deviation of the per-t likelihood from the total.
    pub fn consistency_gap(&self) -> f64 {
        self.log_likelihood_by_t
            .iter()
            .map(|l| ((l - self.log_likelihood).exp() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn posteriors_with(
    model: &HmmModel,
    layout: &Layout,
    y: &[f64],
    start_hour: u8,
    keep_pairwise: bool,
) -> Result<PosteriorTable, HmmError> {
    let fwd = forward_with(model, layout, y, start_hour)?;
    let bwd = backward_with(model, layout, &fwd);
    let m = model.n_states();
    let n = y.len();
    let total = fwd.log_likelihood;
    let mut marginals = Vec::with_capacity(n);
    let mut by_t = Vec::with_capacity(n);
    for t in 0..n {
        let prod: Vec<f64> = (0..m)
            .map(|i| fwd.alpha_hat[t][i] * fwd.b_tilde[t][i] * bwd.beta_hat[t][i])
            .collect();
        let s: f64 = prod.iter().sum();
        by_t.push(s.ln() + fwd.shift[t] + (total - fwd.log_scale[t]));
        marginals.push(prod.iter().map(|p| p / fwd.norm[t]).collect());
    }
    let mut counts = vec![vec![0.0; m]; m];
    let mut pairwise = keep_pairwise.then(|| Vec::with_capacity(n.saturating_sub(1)));
    let mut w = vec![0.0; m];
    for t in 0..n.saturating_sub(1) {
        let scale = fwd.norm[t] * fwd.norm[t + 1];
        for j in 0..m {
            w[j] = fwd.b_tilde[t + 1][j] * bwd.beta_hat[t + 1][j];
        }
        let mut block = pairwise.as_ref().map(|_| vec![0.0; m * m]);
        for i in 0..m {
            let left = fwd.alpha_hat[t][i] * fwd.b_tilde[t][i];
            if left == 0.0 {
                continue;
            }
            for &j in &layout.succ[i] {
                let xi = left * model.transitions[i][j] * w[j] / scale;
                counts[i][j] += xi;
                if let Some(b) = block.as_mut() {
                    b[i * m + j] = xi;
                }
            }
        }
        if let (Some(p), Some(b)) = (pairwise.as_mut(), block) {
            p.push(b);
        }
    }
    Ok(PosteriorTable {
        marginals,
        pairwise,
        transition_counts: counts,
        log_likelihood: total,
        log_likelihood_by_t: by_t,
    })
}

/// Marginal and pairwise posteriors with the sequence log-likelihood.
pub fn posteriors(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<PosteriorTable, HmmError> {
    posteriors_with(model, &Layout::new(model), y, start_hour, true)
}

/// As [`posteriors`] but keeps only the summed pairwise posteriors.
pub fn posteriors_summary(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<PosteriorTable, HmmError> {
    posteriors_with(model, &Layout::new(model), y, start_hour, false)
}

/// `P(q_T | y_0..y_T)`.
pub fn filter(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<Vec<f64>, HmmError> {
    let fwd = forward(model, y, start_hour)?;
    Ok(fwd.filtered(fwd.last()))
}

/// `P(q_{T+1} | y_0..y_T)`.
pub fn predict_state(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<Vec<f64>, HmmError> {
    Ok(forward(model, y, start_hour)?.predicted)
}

/// `P(q_p | y_0..y_T)` for `0 <= p <= T`.
pub fn smooth(model: &HmmModel, y: &[f64], start_hour: u8, p: usize) -> Result<Vec<f64>, HmmError> {
    if p >= y.len() {
        return Err(HmmError::IndexOutOfRange {
            index: p,
            last: y.len().saturating_sub(1),
        });
    }
    let mut table = posteriors_summary(model, y, start_hour)?;
    Ok(table.marginals.swap_remove(p))
}

/// Incremental filter: holds the predictive distribution of the next state
/// and folds in one observation at a time. Equivalent to re-running
/// [`forward`] on the growing sequence.
#[derive(Debug, Clone)]
pub struct OnlineFilter {
    model: HmmModel,
    succ: Vec<Vec<usize>>,
    supports: Vec<Vec<usize>>,
    predicted: Vec<f64>,
    next_hour: u8,
    observed: usize,
    log_likelihood: f64,
}

impl OnlineFilter {
    pub fn new(model: &HmmModel, start_hour: u8) -> Result<Self, HmmError> {
        model.validate(1e-6)?;
        let layout = Layout::new(model);
        Ok(Self {
            model: model.clone(),
            succ: layout.succ,
            supports: layout.supports,
            predicted: model.initial.clone(),
            next_hour: start_hour,
            observed: 0,
            log_likelihood: 0.0,
        })
    }

    /// Filter that has already consumed `y`.
    pub fn after(model: &HmmModel, y: &[f64], start_hour: u8) -> Result<Self, HmmError> {
        let mut f = Self::new(model, start_hour)?;
        for &v in y {
            f.observe(v)?;
        }
        Ok(f)
    }

    /// Distribution of the state at the next observation.
    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    /// Wall-clock hour of the next observation.
    pub fn next_hour(&self) -> u8 {
        self.next_hour
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn model(&self) -> &HmmModel {
        &self.model
    }

    /// Folds in `y`; returns the filtered distribution at that step.
    pub fn observe(&mut self, y: f64) -> Result<Vec<f64>, HmmError> {
        let support = &self.supports[self.next_hour as usize];
        let mut b = vec![0.0; self.model.n_states()];
        let shift = emissions(&self.model, support, y, &mut b);
        let res = step(&self.model, &self.succ, support, &self.predicted, &b, self.observed);
        let (norm, filtered, next) = res?;
        self.log_likelihood += norm.ln() + shift;
        self.predicted = next;
        self.next_hour = (self.next_hour + 1) % 24;
        self.observed += 1;
        Ok(filtered)
    }
}
