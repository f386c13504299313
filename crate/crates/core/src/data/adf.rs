//! Augmented Dickey-Fuller unit-root test with a constant term.

use serde::{Deserialize, Serialize};

use super::{ConsumptionSeries, DataError};
use crate::linalg::weighted_lstsq;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub test_statistic: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    pub critical_value_99: f64,
    pub reject_unit_root_99: bool,
}

/// Fuller's 1% critical values for the constant-only case, by sample size.
const CRITICAL_1PCT: [(f64, f64); 6] = [
    (25.0, -3.75),
    (50.0, -3.58),
    (100.0, -3.51),
    (250.0, -3.46),
    (500.0, -3.44),
    (f64::INFINITY, -3.43),
];

/// 1% critical value for `n` regression observations, interpolated linearly
/// in `1/n` between tabulated sizes.
pub fn adf_critical_value_99(n: usize) -> f64 {
    let inv = 1.0 / n.max(1) as f64;
    let (n0, c0) = CRITICAL_1PCT[0];
    if inv >= 1.0 / n0 {
        return c0;
    }
    for w in CRITICAL_1PCT.windows(2) {
        let (a, ca) = (1.0 / w[0].0, w[0].1);
        let (b, cb) = (1.0 / w[1].0, w[1].1);
        if inv <= a && inv >= b {
            let frac = (inv - b) / (a - b);
            return cb + (ca - cb) * frac;
        }
    }
    CRITICAL_1PCT[CRITICAL_1PCT.len() - 1].1
}

struct Fit {
    ssr: f64,
    n: usize,
    k: usize,
    t_stat: f64,
}

/// Regresses `dy[t]` on `[1, y[t], dy[t-1], .., dy[t-lags]]` for `t` in
/// `first..dy.len()`.
fn regress(y: &[f64], dy: &[f64], lags: usize, first: usize) -> Fit {
    let k = lags + 2;
    let rows = dy.len() - first;
    let mut x = Vec::with_capacity(rows * k);
    let mut target = Vec::with_capacity(rows);
    for t in first..dy.len() {
        x.push(1.0);
        x.push(y[t]);
        for j in 1..=lags {
            x.push(dy[t - j]);
        }
        target.push(dy[t]);
    }
    let sol = weighted_lstsq(&x, k, &target, None);
    let ssr: f64 = target
        .iter()
        .enumerate()
        .map(|(i, yt)| {
            let fit: f64 = x[i * k..(i + 1) * k].iter().zip(&sol.coef).map(|(a, b)| a * b).sum();
            (yt - fit).powi(2)
        })
        .sum();
    let sigma2 = ssr / (rows - k) as f64;
    let se = (sigma2 * sol.gram_pinv[(1, 1)]).sqrt();
    Fit {
        ssr,
        n: rows,
        k,
        t_stat: sol.coef[1] / se,
    }
}

/// ADF test on raw values. The lag order is chosen by AIC over
/// `0..=max_lags` on a common sample, then refitted on all usable rows.
pub fn adf_test_values(y: &[f64], max_lags: usize) -> Result<AdfResult, DataError> {
    let n = y.len();
    // rows available at max lag must exceed the parameter count
    let needed = (max_lags + 2).max(2 * max_lags + 3);
    if n <= needed {
        return Err(DataError::InsufficientData { needed, got: n });
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best = (f64::INFINITY, 0usize);
    for lags in 0..=max_lags {
        let fit = regress(y, &dy, lags, max_lags);
        let aic = fit.n as f64 * (fit.ssr / fit.n as f64).ln() + 2.0 * fit.k as f64;
        if aic < best.0 {
            best = (aic, lags);
        }
    }
    let lags = best.1;
    let fit = regress(y, &dy, lags, lags);
    if !fit.t_stat.is_finite() {
        return Err(DataError::InvalidSeries(
            "ADF regression is degenerate (zero residual variance)".into(),
        ));
    }
    let critical_value_99 = adf_critical_value_99(fit.n);
    Ok(AdfResult {
        test_statistic: fit.t_stat,
        lags_used: lags,
        n_obs: fit.n,
        critical_value_99,
        reject_unit_root_99: fit.t_stat < critical_value_99,
    })
}

pub fn adf_test(series: &ConsumptionSeries, max_lags: usize) -> Result<AdfResult, DataError> {
    adf_test_values(&series.consumption(), max_lags)
}
