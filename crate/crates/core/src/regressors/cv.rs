//! Cross-validation over contiguous, time-ordered folds.

use std::ops::Range;

use super::{DesignMatrix, RegressError, RegressorSpec};
use crate::batch::{self, Exec};
use crate::forecast::mape;

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: RegressorSpec,
    /// Mean out-of-fold MAPE of each grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Splits `0..n` into `folds` contiguous blocks whose sizes differ by at
/// most one, larger blocks first.
pub fn contiguous_folds(n: usize, folds: usize) -> Vec<Range<usize>> {
    let base = n / folds;
    let extra = n % folds;
    let mut start = 0;
    (0..folds)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn score(data: &DesignMatrix, spec: &RegressorSpec, folds: &[Range<usize>]) -> Result<f64, RegressError> {
    let n = data.n_rows();
    let mut total = 0.0;
    let mut scored = 0usize;
    for fold in folds {
        let train: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        // k larger than the training part falls back to all of it
        let spec = match *spec {
            RegressorSpec::Knn { k, standardize } => RegressorSpec::Knn {
                k: k.min(train.len()),
                standardize,
            },
            s => s,
        };
        let model = spec.fit(&data.select(&train))?;
        let mut pred = Vec::with_capacity(fold.len());
        for i in fold.clone() {
            pred.push(model.predict(data.row(i))?);
        }
        if let Ok(m) = mape(&pred, &data.y()[fold.clone()]) {
            total += m.value;
            scored += 1;
        }
    }
    if scored == 0 {
        return Err(RegressError::FoldTooSmall(
            "no fold has a non-zero outcome to score".into(),
        ));
    }
    Ok(total / scored as f64)
}

/// Picks the grid point with the lowest mean out-of-fold MAPE; ties go to
/// the simpler candidate.
pub fn cross_validate(
    data: &DesignMatrix,
    grid: &[RegressorSpec],
    folds: usize,
    exec: Exec,
) -> Result<CvOutcome, RegressError> {
    if grid.is_empty() {
        return Err(RegressError::EmptyGrid);
    }
    if folds < 2 {
        return Err(RegressError::InvalidHyperparameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if data.n_rows() < folds {
        return Err(RegressError::FoldTooSmall(format!(
            "{} rows cannot fill {folds} folds",
            data.n_rows()
        )));
    }
    if grid.len() == 1 {
        return Ok(CvOutcome {
            best: grid[0],
            scores: vec![score(data, &grid[0], &contiguous_folds(data.n_rows(), folds))?],
        });
    }
    let ranges = contiguous_folds(data.n_rows(), folds);
    let scores = batch::map(exec, grid, |spec| score(data, spec, &ranges))
        .into_iter()
        .collect::<Result<Vec<f64>, _>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        let (s, b) = (scores[i], scores[best]);
        let tie = (s - b).abs() <= 1e-12 * b.abs().max(1e-300);
        if (s < b && !tie) || (tie && grid[i].complexity() < grid[best].complexity()) {
            best = i;
        }
    }
    Ok(CvOutcome {
        best: grid[best],
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_cover_range_contiguously() {
        let f = contiguous_folds(10, 3);
        assert_eq!(f, vec![0..4, 4..7, 7..10]);
    }

    #[test]
    fn single_grid_point_is_returned() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = DesignMatrix::new(&rows, (1..=10).map(f64::from).collect()).unwrap();
        let out = cross_validate(&d, &[RegressorSpec::Ols], 2, Exec::Sequential).unwrap();
        assert_eq!(out.best, RegressorSpec::Ols);
    }

    #[test]
    fn knn_picks_exact_lookup() {
        // x cycles through 0..5 so every held-out point has a twin in training
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| 1.0 + ((i % 5) * (i % 5)) as f64).collect();
        let d = DesignMatrix::new(&rows, y).unwrap();
        let grid = [
            RegressorSpec::Knn {
                k: 1,
                standardize: false,
            },
            RegressorSpec::Knn {
                k: 20,
                standardize: false,
            },
        ];
        let out = cross_validate(&d, &grid, 4, Exec::Parallel).unwrap();
        assert_eq!(out.best, grid[0]);
        assert_eq!(out.scores[0], 0.0);
        assert!(out.scores[1] > 0.0);
    }

    #[test]
    fn ties_prefer_simpler_model() {
        // outcome is constant, so every depth scores zero
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let d = DesignMatrix::new(&rows, vec![2.0; 12]).unwrap();
        let grid = [
            RegressorSpec::Tree {
                max_depth: 4,
                min_samples_leaf: 1,
            },
            RegressorSpec::Tree {
                max_depth: 2,
                min_samples_leaf: 1,
            },
        ];
        let out = cross_validate(&d, &grid, 3, Exec::Sequential).unwrap();
        assert_eq!(out.best, grid[1]);
        let grid = [
            RegressorSpec::Svr {
                c: 1.0,
                epsilon: 0.01,
                gamma: None,
            },
            RegressorSpec::Svr {
                c: 1.0,
                epsilon: 0.1,
                gamma: None,
            },
        ];
        let out = cross_validate(&d, &grid, 3, Exec::Sequential).unwrap();
        assert_eq!(out.best, grid[1]);
    }

    #[test]
    fn error_paths() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let d = DesignMatrix::new(&rows, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            cross_validate(&d, &[], 2, Exec::Sequential),
            Err(RegressError::EmptyGrid)
        );
        assert!(matches!(
            cross_validate(&d, &[RegressorSpec::Ols], 4, Exec::Sequential),
            Err(RegressError::FoldTooSmall(_))
        ));
        assert!(cross_validate(&d, &[RegressorSpec::Ols], 1, Exec::Sequential).is_err());
    }
}
