//! CART regression tree grown by exhaustive search over midpoint thresholds,
//! minimising the size-weighted mean squared error of the two children.

use serde::{Deserialize, Serialize};

use super::{check_dim, DesignMatrix, RegressError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Index of the leaf reached by `x`.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[feature] <= threshold { left } else { right },
                TreeNode::Leaf { .. } => return at,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Sum of child squared errors.
    child_sse: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    (sum_sq - sum * sum / n as f64).max(0.0)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t >= b {
        a
    } else {
        t
    }
}

fn best_split(data: &DesignMatrix, rows: &[usize], min_leaf: usize) -> Option<BestSplit> {
    let n = rows.len();
    let y = data.y();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut order = rows.to_vec();
    for j in 0..data.n_cols() {
        order.sort_by(|&a, &b| data.row(a)[j].total_cmp(&data.row(b)[j]).then(a.cmp(&b)));
        let total_sum: f64 = order.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| y[i] * y[i]).sum();
        let (mut ls, mut lsq) = (0.0, 0.0);
        for p in 0..n - 1 {
            let yi = y[order[p]];
            ls += yi;
            lsq += yi * yi;
            let n_left = p + 1;
            let n_right = n - n_left;
            let (a, b) = (data.row(order[p])[j], data.row(order[p + 1])[j]);
            if a == b || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let child = sse(ls, lsq, n_left) + sse(total_sum - ls, total_sq - lsq, n_right);
            if best.is_none_or(|(_, _, c)| child < c) {
                best = Some((j, midpoint(a, b), child));
            }
        }
    }
    let (feature, threshold, child_sse) = best?;
    let (left, right) = rows.iter().partition(|&&i| data.row(i)[feature] <= threshold);
    Some(BestSplit {
        feature,
        threshold,
        child_sse,
        left,
        right,
    })
}

/// Grows a tree. A node is split while its depth is below `max_depth`, both
/// children keep at least `min_samples_leaf` rows, and the split lowers the
/// squared error.
pub fn fit_tree(
    data: &DesignMatrix,
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<RegressionTree, RegressError> {
    if max_depth < 1 || min_samples_leaf < 1 {
        return Err(RegressError::InvalidHyperparameter(format!(
            "need max_depth >= 1 and min_samples_leaf >= 1 (got {max_depth}, {min_samples_leaf})"
        )));
    }
    let mut tree = RegressionTree {
        n_features: data.n_cols(),
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    grow(data, &mut tree, rows, 0, max_depth, min_samples_leaf);
    Ok(tree)
}

fn grow(
    data: &DesignMatrix,
    tree: &mut RegressionTree,
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> usize {
    let y = data.y();
    let n = rows.len();
    let sum: f64 = rows.iter().map(|&i| y[i]).sum();
    let sum_sq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    let node_sse = sse(sum, sum_sq, n);
    let at = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf {
        value: sum / n as f64,
        n_samples: n,
    });
    if depth >= max_depth || n < 2 * min_leaf || node_sse <= 0.0 {
        return at;
    }
    let Some(split) = best_split(data, &rows, min_leaf) else {
        return at;
    };
    // no gain (up to rounding of the running sums)
    if split.child_sse >= node_sse * (1.0 - 1e-12) {
        return at;
    }
    let left = grow(data, tree, split.left, depth + 1, max_depth, min_leaf);
    let right = grow(data, tree, split.right, depth + 1, max_depth, min_leaf);
    tree.nodes[at] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
        n_samples: n,
    };
    at
}

pub fn tree_predict(model: &RegressionTree, x: &[f64]) -> Result<f64, RegressError> {
    check_dim(model.n_features, x)?;
    match model.nodes[model.leaf_of(x)] {
        TreeNode::Leaf { value, .. } => Ok(value),
        TreeNode::Split { .. } => unreachable!("leaf_of returns a leaf"),
    }
}
