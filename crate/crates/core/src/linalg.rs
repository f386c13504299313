//! Weighted least squares with a minimum-norm pseudo-inverse fallback.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of the Gram matrix below this fraction of the largest one are
/// treated as zero.
const RELATIVE_EIGEN_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coef: Vec<f64>,
    pub rank: usize,
    /// Pseudo-inverse of the (weighted) Gram matrix `X'DX`.
    pub gram_pinv: DMatrix<f64>,
}

impl LstsqSolution {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.coef.len()
    }
}

/// Solves `min_w sum_i weight_i (y_i - x_i . w)^2` for row-major `x`
/// (`n` rows of width `d`). Unit weights when `weights` is `None`.
///
/// Uses the normal equations with a symmetric eigendecomposition, which gives
/// the minimum-norm solution when `X'DX` is singular.
pub fn weighted_lstsq(x: &[f64], d: usize, y: &[f64], weights: Option<&[f64]>) -> LstsqSolution {
    let n = y.len();
    debug_assert_eq!(x.len(), n * d);
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let row = &x[i * d..(i + 1) * d];
        for a in 0..d {
            let wa = w * row[a];
            if wa == 0.0 {
                continue;
            }
            rhs[a] += wa * y[i];
            for b in a..d {
                gram[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let (pinv, rank) = symmetric_pinv(gram);
    let coef = &pinv * rhs;
    LstsqSolution {
        coef: coef.iter().copied().collect(),
        rank,
        gram_pinv: pinv,
    }
}

/// Pseudo-inverse of a symmetric positive semi-definite matrix and its
/// numerical rank.
pub fn symmetric_pinv(m: DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let d = m.nrows();
    let eig = SymmetricEigen::new(m);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = lmax * RELATIVE_EIGEN_CUTOFF;
    let mut pinv = DMatrix::<f64>::zeros(d, d);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lmax <= 0.0 || lambda <= cutoff {
            continue;
        }
        rank += 1;
        let v = eig.eigenvectors.column(k);
        pinv += (v * v.transpose()) / lambda;
    }
    (pinv, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_full_rank_system() {
        // y = 1 + 2x on x = 0..3, with an intercept column
        let x = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let sol = weighted_lstsq(&x, 2, &y, None);
        assert!(!sol.rank_deficient());
        assert!((sol.coef[0] - 1.0).abs() < 1e-12);
        assert!((sol.coef[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_columns_give_minimum_norm() {
        // two identical columns: min-norm splits the weight evenly
        let x = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let sol = weighted_lstsq(&x, 2, &y, None);
        assert_eq!(sol.rank, 1);
        assert!((sol.coef[0] - 1.0).abs() < 1e-10);
        assert!((sol.coef[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_weights_give_zero_solution() {
        let x = [1.0, 2.0];
        let y = [1.0, 2.0];
        let sol = weighted_lstsq(&x, 1, &y, Some(&[0.0, 0.0]));
        assert_eq!(sol.rank, 0);
        assert_eq!(sol.coef, vec![0.0]);
    }
}
