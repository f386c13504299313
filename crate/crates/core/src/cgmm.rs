//! Conditional Gaussian mixture of linear regressions with a shared noise
//! variance, fitted by EM. Prediction weights the component regressions by
//! the training responsibilities of the query's nearest neighbour.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::weighted_lstsq;
use crate::regressors::{fit_ols, DesignMatrix};
use crate::stats::{dot, log_sum_exp, normal_log_pdf};
use crate::EmTrace;

pub const VARIANCE_FLOOR: f64 = 1e-10;
pub const DEFAULT_COMPONENTS: usize = 2;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Per-coordinate perturbation std as a fraction of `|w_ols| / sqrt(d)`.
pub const PERTURBATION_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CgmmError {
    #[error("need at least one mixture component")]
    NoComponents,
    #[error("dimension mismatch: model has {expected} covariates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model has no training rows to look up neighbours in")]
    EmptyTrainingSet,
    #[error("responsibility matrix has {got} rows for {expected} observations")]
    ResponsibilityShape { expected: usize, got: usize },
}

/// Row-major N x K responsibilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    pub k: usize,
    pub values: Vec<f64>,
}

impl Responsibilities {
    pub fn n_rows(&self) -> usize {
        self.values.len() / self.k.max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    /// All mass on one component for every row.
    pub fn hard(n: usize, k: usize, component: usize) -> Self {
        let mut values = vec![0.0; n * k];
        for i in 0..n {
            values[i * k + component] = 1.0;
        }
        Self { k, values }
    }
}

/// Mixture parameters: weights, per-component coefficients and the shared
/// noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgmmParams {
    pub weights: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub variance: f64,
}

impl CgmmParams {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }
}

/// Output of one M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub params: CgmmParams,
    /// Components whose weighted normal matrix was singular.
    pub singular_components: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgmmModel {
    pub params: CgmmParams,
    /// Responsibilities of the final E-step on the training rows.
    pub responsibilities: Responsibilities,
    /// Training covariates, kept for nearest-neighbour lookup.
    pub training: DesignMatrix,
}

fn log_joint(params: &CgmmParams, x: &[f64], y: f64, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = params.weights[k].ln() + normal_log_pdf(y, dot(&params.coefficients[k], x), params.variance);
    }
}

/// Posterior component probabilities of every row, normalised in log space.
/// Also returns the observed-data log-likelihood.
pub fn e_step(params: &CgmmParams, data: &DesignMatrix) -> Result<(Responsibilities, f64), CgmmError> {
    let k = params.n_components();
    if k == 0 {
        return Err(CgmmError::NoComponents);
    }
    if let Some(w) = params.coefficients.iter().find(|w| w.len() != data.n_cols()) {
        return Err(CgmmError::DimensionMismatch {
            expected: w.len(),
            got: data.n_cols(),
        });
    }
    let mut values = Vec::with_capacity(data.n_rows() * k);
    let mut lp = vec![0.0; k];
    let mut loglik = 0.0;
    for i in 0..data.n_rows() {
        log_joint(params, data.row(i), data.y()[i], &mut lp);
        let norm = log_sum_exp(&lp);
        loglik += norm;
        values.extend(lp.iter().map(|l| (l - norm).exp()));
    }
    Ok((Responsibilities { k, values }, loglik))
}

pub fn cgmm_e_step(params: &CgmmParams, data: &DesignMatrix) -> Result<Responsibilities, CgmmError> {
    e_step(params, data).map(|r| r.0)
}

/// Expected complete log-likelihood `sum_ik z_ik log(pi_k N(y_i | w_k.x_i, s2))`.
pub fn expected_complete_log_likelihood(params: &CgmmParams, resp: &Responsibilities, data: &DesignMatrix) -> f64 {
    let mut lp = vec![0.0; params.n_components()];
    let mut total = 0.0;
    for i in 0..data.n_rows() {
        log_joint(params, data.row(i), data.y()[i], &mut lp);
        for (z, l) in resp.row(i).iter().zip(&lp) {
            if *z > 0.0 {
                total += z * l;
            }
        }
    }
    total
}

/// Closed-form maximisation: mean responsibility for the weights, weighted
/// least squares per component, pooled weighted residual variance.
pub fn cgmm_m_step(resp: &Responsibilities, data: &DesignMatrix) -> Result<MStep, CgmmError> {
    let (n, k, d) = (data.n_rows(), resp.k, data.n_cols());
    if k == 0 {
        return Err(CgmmError::NoComponents);
    }
    if resp.n_rows() != n {
        return Err(CgmmError::ResponsibilityShape {
            expected: n,
            got: resp.n_rows(),
        });
    }
    let mut weights = vec![0.0; k];
    let mut coefficients = Vec::with_capacity(k);
    let mut singular_components = Vec::new();
    let mut column = vec![0.0; n];
    for c in 0..k {
        for (i, z) in column.iter_mut().enumerate() {
            *z = resp.values[i * k + c];
        }
        weights[c] = column.iter().sum::<f64>() / n as f64;
        let sol = weighted_lstsq(data.x(), d, data.y(), Some(&column));
        if sol.rank_deficient() {
            singular_components.push(c);
        }
        coefficients.push(sol.coef);
    }
    let mut ss = 0.0;
    for i in 0..n {
        let x = data.row(i);
        for (c, w) in coefficients.iter().enumerate() {
            let z = resp.values[i * k + c];
            if z > 0.0 {
                ss += z * (data.y()[i] - dot(w, x)).powi(2);
            }
        }
    }
    let variance = (ss / n as f64).max(VARIANCE_FLOOR);
    Ok(MStep {
        params: CgmmParams {
            weights,
            coefficients,
            variance,
        },
        singular_components,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgmmConfig {
    pub components: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for CgmmConfig {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

/// Initial parameters: OLS coefficients plus seeded Gaussian noise for every
/// component, uniform weights, OLS residual variance.
pub fn initial_params(data: &DesignMatrix, components: usize, seed: u64) -> CgmmParams {
    let ols = fit_ols(data).model.weights;
    let d = data.n_cols();
    let norm = ols.iter().map(|w| w * w).sum::<f64>().sqrt();
    let scale = PERTURBATION_SCALE * norm / (d as f64).sqrt();
    let mut rng = crate::rng::seeded(seed);
    let coefficients = (0..components)
        .map(|_| {
            ols.iter()
                .map(|w| w + scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let resid: f64 = (0..data.n_rows())
        .map(|i| (data.y()[i] - dot(&ols, data.row(i))).powi(2))
        .sum::<f64>()
        / data.n_rows() as f64;
    CgmmParams {
        weights: vec![1.0 / components as f64; components],
        coefficients,
        variance: resid.max(VARIANCE_FLOOR),
    }
}

/// Runs EM from [`initial_params`] until the log-likelihood gain drops below
/// `tol` or `max_iter` iterations have run.
pub fn fit_cgmm(data: &DesignMatrix, config: &CgmmConfig) -> Result<(CgmmModel, EmTrace), CgmmError> {
    if config.components == 0 {
        return Err(CgmmError::NoComponents);
    }
    fit_cgmm_from(data, initial_params(data, config.components, config.seed), config)
}

/// EM from explicit starting parameters.
pub fn fit_cgmm_from(
    data: &DesignMatrix,
    init: CgmmParams,
    config: &CgmmConfig,
) -> Result<(CgmmModel, EmTrace), CgmmError> {
    let mut params = init;
    let (mut resp, mut loglik) = e_step(&params, data)?;
    let mut trace = EmTrace {
        log_likelihood: vec![loglik],
        expected_complete: vec![expected_complete_log_likelihood(&params, &resp, data)],
        converged: false,
        iterations: 0,
    };
    while trace.iterations < config.max_iter {
        params = cgmm_m_step(&resp, data)?.params;
        let (next_resp, next_ll) = e_step(&params, data)?;
        trace.iterations += 1;
        trace.log_likelihood.push(next_ll);
        trace
            .expected_complete
            .push(expected_complete_log_likelihood(&params, &next_resp, data));
        let gain = next_ll - loglik;
        resp = next_resp;
        loglik = next_ll;
        if gain < config.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((
        CgmmModel {
            params,
            responsibilities: resp,
            training: data.clone(),
        },
        trace,
    ))
}

/// `sum_k z_jk w_k . x` where `j` is the training row nearest to `x`.
pub fn cgmm_predict(model: &CgmmModel, x: &[f64]) -> Result<f64, CgmmError> {
    if model.training.n_rows() == 0 {
        return Err(CgmmError::EmptyTrainingSet);
    }
    if x.len() != model.training.n_cols() {
        return Err(CgmmError::DimensionMismatch {
            expected: model.training.n_cols(),
            got: x.len(),
        });
    }
    let j = model.training.nearest_row(x);
    Ok(model
        .responsibilities
        .row(j)
        .iter()
        .zip(&model.params.coefficients)
        .map(|(z, w)| z * dot(w, x))
        .sum())
}

impl CgmmModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, CgmmError> {
        cgmm_predict(self, x)
    }

    /// The same model with components reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.params.n_components();
        let mut out = self.clone();
        out.params.weights = perm.iter().map(|&p| self.params.weights[p]).collect();
        out.params.coefficients = perm.iter().map(|&p| self.params.coefficients[p].clone()).collect();
        for i in 0..self.responsibilities.n_rows() {
            for (c, &p) in perm.iter().enumerate() {
                out.responsibilities.values[i * k + c] = self.responsibilities.values[i * k + p];
            }
        }
        out
    }
}
