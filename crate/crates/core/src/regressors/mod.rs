//! Baseline supervised regressors on a shared design-matrix interface.

mod cv;
mod knn;
mod ols;
mod svr;
mod tree;

use serde::{Deserialize, Serialize};

pub use cv::{contiguous_folds, cross_validate, CvOutcome};
pub use knn::{knn_predict, KnnModel};
pub use ols::{fit_ols, predict_linear, LinearModel, OlsFit};
pub use svr::{fit_svr, svr_predict, SvrModel, SvrSolverOptions};
pub use tree::{fit_tree, tree_predict, RegressionTree, TreeNode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("design matrix must have at least one row and one column")]
    EmptyDesign,
    #[error("design matrix contains a non-finite value at row {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("SVR solver did not converge after {iterations} iterations (KKT gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("cross-validation grid is empty")]
    EmptyGrid,
    #[error("fold too small: {0}")]
    FoldTooSmall(String),
}

/// Row-major covariates `X` (N x d) with outcomes `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self, RegressError> {
        let d = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(RegressError::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            x.extend_from_slice(r);
        }
        Self::from_flat(x, d, y)
    }

    pub fn from_flat(x: Vec<f64>, d: usize, y: Vec<f64>) -> Result<Self, RegressError> {
        let n = y.len();
        if n == 0 || d == 0 {
            return Err(RegressError::EmptyDesign);
        }
        if x.len() != n * d {
            return Err(RegressError::DimensionMismatch {
                expected: n * d,
                got: x.len(),
            });
        }
        for i in 0..n {
            if !y[i].is_finite() || x[i * d..(i + 1) * d].iter().any(|v| !v.is_finite()) {
                return Err(RegressError::NonFinite(i));
            }
        }
        Ok(Self { n, d, x, y })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Self {
            n: indices.len(),
            d: self.d,
            x,
            y,
        }
    }

    /// Appends one row.
    pub fn push(&mut self, row: &[f64], y: f64) -> Result<(), RegressError> {
        check_dim(self.d, row)?;
        self.x.extend_from_slice(row);
        self.y.push(y);
        self.n += 1;
        Ok(())
    }

    /// Index of the row nearest to `x` in Euclidean distance, ties to the
    /// lower index.
    pub fn nearest_row(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.n {
            let d = crate::stats::squared_distance(self.row(i), x);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), RegressError> {
    if x.len() != expected {
        return Err(RegressError::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// A regressor family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RegressorSpec {
    Ols,
    Knn {
        k: usize,
        /// Standardise columns before measuring distance.
        standardize: bool,
    },
    Svr {
        c: f64,
        epsilon: f64,
        /// Kernel bandwidth; `None` means `1 / d`.
        gamma: Option<f64>,
    },
    Tree {
        max_depth: usize,
        min_samples_leaf: usize,
    },
}

impl RegressorSpec {
    pub fn fit(&self, data: &DesignMatrix) -> Result<FittedRegressor, RegressError> {
        Ok(match *self {
            RegressorSpec::Ols => FittedRegressor::Linear(fit_ols(data).model),
            RegressorSpec::Knn { k, standardize } => FittedRegressor::Knn(KnnModel::fit(data, k, standardize)?),
            RegressorSpec::Svr { c, epsilon, gamma } => {
                let gamma = gamma.unwrap_or(1.0 / data.n_cols() as f64);
                FittedRegressor::Svr(fit_svr(data, c, epsilon, gamma)?)
            }
            RegressorSpec::Tree {
                max_depth,
                min_samples_leaf,
            } => FittedRegressor::Tree(fit_tree(data, max_depth, min_samples_leaf)?),
        })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            RegressorSpec::Ols => "ols",
            RegressorSpec::Knn { .. } => "knn",
            RegressorSpec::Svr { .. } => "svr",
            RegressorSpec::Tree { .. } => "dt",
        }
    }

    /// Orders candidates of one family from simplest to most complex:
    /// smaller k, shallower trees, wider SVR tubes.
    pub(crate) fn complexity(&self) -> (f64, f64) {
        match *self {
            RegressorSpec::Ols => (0.0, 0.0),
            RegressorSpec::Knn { k, .. } => (k as f64, 0.0),
            RegressorSpec::Svr { c, epsilon, .. } => (-epsilon, c),
            RegressorSpec::Tree {
                max_depth,
                min_samples_leaf,
            } => (max_depth as f64, -(min_samples_leaf as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedRegressor {
    Linear(LinearModel),
    Knn(KnnModel),
    Svr(SvrModel),
    Tree(RegressionTree),
}

impl FittedRegressor {
    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressError> {
        match self {
            FittedRegressor::Linear(m) => predict_linear(m, x),
            FittedRegressor::Knn(m) => m.predict(x),
            FittedRegressor::Svr(m) => svr_predict(m, x),
            FittedRegressor::Tree(m) => tree_predict(m, x),
        }
    }
}
