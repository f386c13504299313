//! Epsilon-SVR with a Gaussian kernel, solved in the dual by sequential
//! minimal optimisation with second-order working-set selection.
//!
//! The dual is written over `2N` variables `a` (the `alpha` and `alpha*`
//! halves) with labels `z = (+1..., -1...)`:
//!
//! ```text
//! min 1/2 a'Qa + p'a   s.t.  z'a = 0,  0 <= a <= C
//! Q_st = z_s z_t K(x_s, x_t),  p = (eps - y, eps + y)
//! ```
//!
//! The per-row multiplier is `beta_i = a_i - a_{i+N}` and the decision
//! function is `sum_i beta_i K(x_i, x) + b`.

use serde::{Deserialize, Serialize};

use super::{check_dim, DesignMatrix, RegressError};
use crate::stats::squared_distance;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrSolverOptions {
    pub kkt_tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvrSolverOptions {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-3,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub bias: f64,
    /// Dual multiplier `beta_i` of every training row, in `[-C, C]`.
    pub multipliers: Vec<f64>,
    /// Rows with a non-zero multiplier, paired with it.
    support: Vec<(Vec<f64>, f64)>,
    pub iterations: usize,
}

impl SvrModel {
    /// Builds a model from explicit support vectors, e.g. for hand fixtures.
    pub fn from_support(support: Vec<(Vec<f64>, f64)>, bias: f64, gamma: f64, c: f64, epsilon: f64) -> Self {
        Self {
            c,
            epsilon,
            gamma,
            bias,
            multipliers: support.iter().map(|s| s.1).collect(),
            support,
            iterations: 0,
        }
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn dim(&self) -> Option<usize> {
        self.support.first().map(|s| s.0.len())
    }
}

fn kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

pub fn fit_svr(data: &DesignMatrix, c: f64, epsilon: f64, gamma: f64) -> Result<SvrModel, RegressError> {
    fit_svr_with(data, c, epsilon, gamma, SvrSolverOptions::default())
}

pub fn fit_svr_with(
    data: &DesignMatrix,
    c: f64,
    epsilon: f64,
    gamma: f64,
    opts: SvrSolverOptions,
) -> Result<SvrModel, RegressError> {
    if !(c > 0.0) || !(epsilon >= 0.0) || !(gamma > 0.0) {
        return Err(RegressError::InvalidHyperparameter(format!(
            "need C > 0, epsilon >= 0, gamma > 0 (got C={c}, epsilon={epsilon}, gamma={gamma})"
        )));
    }
    let n = data.n_rows();
    let y = data.y();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = kernel(gamma, data.row(i), data.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let l = 2 * n;
    let z = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kk = |s: usize, t: usize| k[(s % n) * n + (t % n)];
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] })
        .collect();
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    loop {
        // first index: maximal violation among the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            let cand = if z(t) > 0.0 {
                (!at_upper(alpha[t])).then(|| -grad[t])
            } else {
                (!at_lower(alpha[t])).then(|| grad[t])
            };
            if let Some(v) = cand {
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // second index: largest second-order decrease among the "low" set
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..l {
                let (eligible, g) = if z(t) > 0.0 {
                    (!at_lower(alpha[t]), grad[t])
                } else {
                    (!at_upper(alpha[t]), -grad[t])
                };
                if !eligible {
                    continue;
                }
                gmax2 = gmax2.max(g);
                let diff = gmax + g;
                if diff > 0.0 {
                    // same for both label signs once z_i Q_it is expanded
                    let quad = kk(i, i) + kk(t, t) - 2.0 * kk(i, t);
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(diff * diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        j = t;
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        if i == usize::MAX || j == usize::MAX || gap < opts.kkt_tolerance {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(RegressError::NoConvergence { iterations, gap });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = z(i) * z(j) * kk(i, j);
        if z(i) != z(j) {
            let quad = kk(i, i) + kk(j, j) + 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = kk(i, i) + kk(j, j) - 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..l {
            grad[t] += z(i) * z(t) * kk(i, t) * di + z(j) * z(t) * kk(j, t) * dj;
        }
    }

    // offset from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let yg = z(t) * grad[t];
        if at_upper(alpha[t]) {
            if z(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if z(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let multipliers: Vec<f64> = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    let support = multipliers
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(i, &b)| (data.row(i).to_vec(), b))
        .collect();
    Ok(SvrModel {
        c,
        epsilon,
        gamma,
        bias: -rho,
        multipliers,
        support,
        iterations,
    })
}

pub fn svr_predict(model: &SvrModel, x: &[f64]) -> Result<f64, RegressError> {
    if let Some(d) = model.dim() {
        check_dim(d, x)?;
    }
    Ok(model
        .support
        .iter()
        .map(|(sv, beta)| beta * kernel(model.gamma, sv, x))
        .sum::<f64>()
        + model.bias)
}
