use serde::{Deserialize, Serialize};

use super::{check_dim, DesignMatrix, RegressError};
use crate::linalg::weighted_lstsq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub model: LinearModel,
    /// The minimum-norm pseudo-inverse solution was used.
    pub rank_deficient: bool,
}

pub fn fit_ols(data: &DesignMatrix) -> OlsFit {
    let sol = weighted_lstsq(data.x(), data.n_cols(), data.y(), None);
    OlsFit {
        rank_deficient: sol.rank_deficient(),
        model: LinearModel { weights: sol.coef },
    }
}

pub fn predict_linear(model: &LinearModel, x: &[f64]) -> Result<f64, RegressError> {
    check_dim(model.weights.len(), x)?;
    Ok(crate::stats::dot(&model.weights, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_design() {
        let d = DesignMatrix::new(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, 3.0]).unwrap();
        let fit = fit_ols(&d);
        assert!(!fit.rank_deficient);
        assert!((fit.model.weights[0] - 2.0).abs() < 1e-12);
        assert!((fit.model.weights[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn four_by_two_matches_hand_normal_equations() {
        // X = [1 0; 1 1; 1 2; 1 3], Y = (1, 2, 2, 4)
        // X'X = [4 6; 6 14], X'Y = (9, 18) -> w = (0.9, 0.9)
        let d = DesignMatrix::new(
            &[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]],
            vec![1.0, 2.0, 2.0, 4.0],
        )
        .unwrap();
        let w = fit_ols(&d).model.weights;
        assert!((w[0] - 0.9).abs() < 1e-12);
        assert!((w[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_flag_rank_deficiency() {
        let d = DesignMatrix::new(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]], vec![1.0, 2.0, 3.0]).unwrap();
        let fit = fit_ols(&d);
        assert!(fit.rank_deficient);
        assert!((predict_linear(&fit.model, &[4.0, 4.0]).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn predict_examples() {
        let zero = LinearModel { weights: vec![0.0; 3] };
        assert_eq!(predict_linear(&zero, &[5.0, -1.0, 2.0]).unwrap(), 0.0);
        let e1 = LinearModel {
            weights: vec![0.0, 1.0, 0.0],
        };
        assert_eq!(predict_linear(&e1, &[5.0, -1.0, 2.0]).unwrap(), -1.0);
        let w = LinearModel {
            weights: vec![1.0, 2.0],
        };
        assert_eq!(predict_linear(&w, &[3.0, 4.0]).unwrap(), 11.0);
        assert!(matches!(
            predict_linear(&w, &[1.0]),
            Err(RegressError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    proptest! {
        #[test]
        fn residual_is_orthogonal_to_columns(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 6..30),
            noise in proptest::collection::vec(-1.0f64..1.0, 30),
        ) {
            let y: Vec<f64> = rows.iter().zip(&noise).map(|(r, e)| r[0] - 2.0 * r[2] + e).collect();
            let d = DesignMatrix::new(&rows, y.clone()).unwrap();
            let w = fit_ols(&d).model.weights;
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..3 {
                let g: f64 = rows.iter().zip(&y)
                    .map(|(r, yi)| r[j] * (yi - crate::stats::dot(r, &w)))
                    .sum();
                prop_assert!(g.abs() <= 1e-8 * ynorm.max(1.0));
            }
        }
    }
}
