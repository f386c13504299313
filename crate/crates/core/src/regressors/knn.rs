use serde::{Deserialize, Serialize};

use super::{check_dim, DesignMatrix, RegressError};
use crate::stats::squared_distance;

/// Mean outcome of the `k` rows nearest to `x` (Euclidean, ties to the lower
/// row index). Covariates are used as given.
pub fn knn_predict(data: &DesignMatrix, x: &[f64], k: usize) -> Result<f64, RegressError> {
    check_dim(data.n_cols(), x)?;
    if k == 0 || k > data.n_rows() {
        return Err(RegressError::KOutOfRange { k, n: data.n_rows() });
    }
    let mut order: Vec<(f64, usize)> = (0..data.n_rows())
        .map(|i| (squared_distance(data.row(i), x), i))
        .collect();
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(k);
    }
    // summing in row order keeps k = N independent of x
    let mut chosen: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();
    chosen.sort_unstable();
    Ok(chosen.iter().map(|&i| data.y()[i]).sum::<f64>() / k as f64)
}

/// A KNN regressor: the training set plus optional column standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    data: DesignMatrix,
    /// Per-column (mean, std) when standardising.
    scale: Option<Vec<(f64, f64)>>,
}

impl KnnModel {
    pub fn fit(data: &DesignMatrix, k: usize, standardize: bool) -> Result<Self, RegressError> {
        if k == 0 || k > data.n_rows() {
            return Err(RegressError::KOutOfRange { k, n: data.n_rows() });
        }
        if !standardize {
            return Ok(Self {
                k,
                data: data.clone(),
                scale: None,
            });
        }
        let (n, d) = (data.n_rows(), data.n_cols());
        let scale: Vec<(f64, f64)> = (0..d)
            .map(|j| {
                let m = (0..n).map(|i| data.row(i)[j]).sum::<f64>() / n as f64;
                let v = (0..n).map(|i| (data.row(i)[j] - m).powi(2)).sum::<f64>() / n as f64;
                (m, if v > 0.0 { v.sqrt() } else { 1.0 })
            })
            .collect();
        let x = (0..n).flat_map(|i| apply_scale(&scale, data.row(i))).collect();
        Ok(Self {
            k,
            data: DesignMatrix::from_flat(x, d, data.y().to_vec())?,
            scale: Some(scale),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressError> {
        match &self.scale {
            None => knn_predict(&self.data, x, self.k),
            Some(s) => {
                check_dim(s.len(), x)?;
                knn_predict(&self.data, &apply_scale(s, x), self.k)
            }
        }
    }
}

fn apply_scale(scale: &[(f64, f64)], x: &[f64]) -> Vec<f64> {
    x.iter().zip(scale).map(|(v, (m, s))| (v - m) / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five_rows() -> DesignMatrix {
        DesignMatrix::new(
            &[
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 2.0],
                vec![3.0, 3.0],
                vec![-1.0, -1.0],
            ],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap()
    }

    #[test]
    fn k_equal_n_is_global_mean() {
        let d = five_rows();
        assert_eq!(knn_predict(&d, &[10.0, 10.0], 5).unwrap(), 3.0);
    }

    #[test]
    fn exact_match_with_k1() {
        let d = five_rows();
        assert_eq!(knn_predict(&d, &[3.0, 3.0], 1).unwrap(), 4.0);
    }

    #[test]
    fn two_nearest_by_hand() {
        // x = (0.6, 0.1): squared distances 0.37, 0.17, 3.97, 13.77, 3.77
        // nearest rows 1 and 0 -> (2 + 1) / 2
        let d = five_rows();
        assert_eq!(knn_predict(&d, &[0.6, 0.1], 2).unwrap(), 1.5);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let d = DesignMatrix::new(&[vec![1.0], vec![-1.0]], vec![10.0, 20.0]).unwrap();
        assert_eq!(knn_predict(&d, &[0.0], 1).unwrap(), 10.0);
    }

    #[test]
    fn k_out_of_range() {
        let d = five_rows();
        assert!(matches!(
            knn_predict(&d, &[0.0, 0.0], 0),
            Err(RegressError::KOutOfRange { .. })
        ));
        assert!(matches!(
            knn_predict(&d, &[0.0, 0.0], 6),
            Err(RegressError::KOutOfRange { .. })
        ));
    }

    #[test]
    fn standardised_model_rescales_query() {
        // second column dominates raw distance; standardising evens it out
        let d = DesignMatrix::new(&[vec![0.0, 0.0], vec![1.0, 100.0], vec![2.0, 0.0]], vec![1.0, 2.0, 3.0]).unwrap();
        let raw = KnnModel::fit(&d, 1, false).unwrap();
        let std = KnnModel::fit(&d, 1, true).unwrap();
        assert_eq!(raw.predict(&[0.9, 40.0]).unwrap(), 1.0);
        assert_eq!(std.predict(&[0.9, 40.0]).unwrap(), 2.0);
    }

    proptest! {
        #[test]
        fn full_k_ignores_query(
            ys in proptest::collection::vec(-10.0f64..10.0, 1..20),
            q1 in proptest::collection::vec(-5.0f64..5.0, 2),
            q2 in proptest::collection::vec(-5.0f64..5.0, 2),
        ) {
            let rows: Vec<Vec<f64>> = (0..ys.len()).map(|i| vec![i as f64, (i * i) as f64 % 7.0]).collect();
            let d = DesignMatrix::new(&rows, ys.clone()).unwrap();
            let n = ys.len();
            prop_assert_eq!(knn_predict(&d, &q1, n).unwrap(), knn_predict(&d, &q2, n).unwrap());
        }
    }
}
