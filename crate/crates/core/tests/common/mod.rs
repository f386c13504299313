//! Brute-force HMM reference: sums the joint density over every state path
//! with non-zero weight.

#![allow(dead_code)]

use drlatent::hmm::{HmmModel, StateSpace};
use rand::Rng;

fn density(y: f64, mean: f64, var: f64) -> f64 {
    (-(y - mean) * (y - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Every path of `len` states with its weight; only the first `y.len()`
/// states emit.
pub fn paths(model: &HmmModel, y: &[f64], len: usize) -> Vec<(Vec<usize>, f64)> {
    let m = model.n_states();
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, f64)> = (0..m)
        .filter(|&i| model.initial[i] > 0.0)
        .map(|i| (vec![i], model.initial[i]))
        .collect();
    while let Some((path, w)) = stack.pop() {
        let t = path.len() - 1;
        let q = path[t];
        let w = if t < y.len() {
            w * density(y[t], model.means[q], model.variances[q])
        } else {
            w
        };
        if path.len() == len {
            out.push((path, w));
            continue;
        }
        for j in 0..m {
            let a = model.transitions[q][j];
            if a > 0.0 {
                let mut next = path.clone();
                next.push(j);
                stack.push((next, w * a));
            }
        }
    }
    out
}

pub struct Reference {
    pub likelihood: f64,
    /// `P(q_t = i | Y)`.
    pub marginals: Vec<Vec<f64>>,
    /// `P(q_t = i, q_{t+1} = j | Y)`, row-major.
    pub pairwise: Vec<Vec<f64>>,
}

pub fn reference(model: &HmmModel, y: &[f64]) -> Reference {
    let m = model.n_states();
    let n = y.len();
    let all = paths(model, y, n);
    let likelihood: f64 = all.iter().map(|p| p.1).sum();
    let mut marginals = vec![vec![0.0; m]; n];
    let mut pairwise = vec![vec![0.0; m * m]; n.saturating_sub(1)];
    for (path, w) in &all {
        for t in 0..n {
            marginals[t][path[t]] += w / likelihood;
            if t + 1 < n {
                pairwise[t][path[t] * m + path[t + 1]] += w / likelihood;
            }
        }
    }
    Reference {
        likelihood,
        marginals,
        pairwise,
    }
}

/// `P(q_T | y_0..y_T)` for the whole of `y`.
pub fn filtered(model: &HmmModel, y: &[f64]) -> Vec<f64> {
    reference(model, y).marginals.pop().unwrap()
}

/// `P(q_{T+1} | y_0..y_T)`.
pub fn predicted(model: &HmmModel, y: &[f64]) -> Vec<f64> {
    let all = paths(model, y, y.len() + 1);
    let total: f64 = all.iter().map(|p| p.1).sum();
    let mut out = vec![0.0; model.n_states()];
    for (path, w) in &all {
        out[*path.last().unwrap()] += w / total;
    }
    out
}

fn random_stochastic<R: Rng>(rng: &mut R, allowed: &[bool]) -> Vec<f64> {
    let raw: Vec<f64> = allowed
        .iter()
        .map(|&ok| if ok { rng.random_range(0.05..1.0) } else { 0.0 })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// A random untagged model with `m` states. With `masked`, each transition
/// is forbidden with probability 0.4, keeping at least one per row.
pub fn random_model<R: Rng>(rng: &mut R, m: usize, masked: bool) -> HmmModel {
    let mask: Vec<Vec<bool>> = (0..m)
        .map(|_| {
            let mut row: Vec<bool> = (0..m).map(|_| !masked || rng.random::<f64>() > 0.4).collect();
            if !row.iter().any(|&b| b) {
                row[rng.random_range(0..m)] = true;
            }
            row
        })
        .collect();
    let transitions = mask.iter().map(|r| random_stochastic(rng, r)).collect();
    let initial = random_stochastic(rng, &vec![true; m]);
    HmmModel {
        space: StateSpace::with_mask(mask),
        transitions,
        means: (0..m).map(|_| rng.random_range(-2.0..2.0)).collect(),
        variances: (0..m).map(|_| rng.random_range(0.3..2.0)).collect(),
        initial,
    }
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The hourly chain with random allowed transitions and an initial
/// distribution on the states of `start_hour`.
pub fn random_hourly_model<R: Rng>(rng: &mut R, start_hour: u8) -> HmmModel {
    let space = drlatent::hmm::build_state_space();
    let m = space.len();
    let transitions = space.mask.iter().map(|r| random_stochastic(rng, r)).collect();
    let support: Vec<bool> = (0..m).map(|i| space.states[i].hour == Some(start_hour)).collect();
    let initial = random_stochastic(rng, &support);
    HmmModel {
        space,
        transitions,
        means: (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
        variances: (0..m).map(|_| rng.random_range(0.01..0.2)).collect(),
        initial,
    }
}
