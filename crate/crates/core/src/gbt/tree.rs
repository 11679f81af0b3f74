//! Regression tree grown by exact greedy split enumeration.
//!
//! Row order per feature is sorted once up front and partitioned in place
//! as the tree grows, so a boosting round costs O(n * features * depth)
//! rather than re-sorting at every node. Splits are scored by the
//! reduction in penalized squared error when each side predicts its
//! shrunk mean `sum / (count + lambda)`; thresholds are midpoints of
//! consecutive distinct feature values. The search is exhaustive and
//! deterministic: ties go to the lowest feature index, then the lowest
//! threshold.
//!
//! All target sums run in a canonical order (runs of equal feature values
//! are summed target-ascending), which keeps fitted trees bit-identical
//! under any permutation of the training rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of a fitted regression tree.
///
/// Internal nodes route a row to `left` iff `row[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda_leaf: f64,
}

/// Per-feature row order and column-major feature copies, computed once
/// and shared by every boosting round (feature values never change
/// between rounds).
pub(crate) struct TreeWorkspace {
    /// Row indices sorted by feature value, one list per feature.
    sorted: Vec<Vec<u32>>,
    /// `columns[f][row]`: feature values transposed for dense access
    /// during split scans.
    columns: Vec<Vec<f64>>,
}

impl TreeWorkspace {
    pub(crate) fn new(x: &[Vec<f64>]) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|f| x.iter().map(|row| row[f]).collect())
            .collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..x.len() as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        TreeWorkspace { sorted, columns }
    }
}

/// Fit a regression tree to `targets` by greedy top-down induction.
///
/// Growth stops at `max_depth`, when no split leaves at least
/// `min_samples_leaf` rows on each side, or when no split has positive
/// gain.
pub fn fit_tree(x: &[Vec<f64>], targets: &[f64], params: &TreeParams) -> Result<TreeNode> {
    let workspace = TreeWorkspace::new(x);
    fit_tree_with(&workspace, x, targets, params)
}

/// [`fit_tree`] against a presorted workspace; boosting reuses one
/// workspace across all rounds.
pub(crate) fn fit_tree_with(
    workspace: &TreeWorkspace,
    x: &[Vec<f64>],
    targets: &[f64],
    params: &TreeParams,
) -> Result<TreeNode> {
    if x.is_empty() {
        return Err(Error::EmptyInput("fit_tree requires at least one row".into()));
    }
    if x.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.len(),
            targets.len()
        )));
    }
    if params.max_depth == 0 {
        return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
    }
    if params.lambda_leaf < 0.0 || !params.lambda_leaf.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda_leaf must be finite and >= 0, got {}",
            params.lambda_leaf
        )));
    }
    let width = x[0].len();
    if x.iter().any(|row| row.len() != width) {
        return Err(Error::DimensionMismatch("ragged feature rows".into()));
    }
    let node_cols = workspace.sorted.clone();
    Ok(grow(workspace, targets, node_cols, 0, params))
}

/// Sum in sorted order so the result does not depend on row order.
fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

fn node_total(targets: &[f64], rows: &[u32]) -> f64 {
    let mut values: Vec<f64> = rows.iter().map(|&i| targets[i as usize]).collect();
    canonical_sum(&mut values)
}

fn grow(
    ws: &TreeWorkspace,
    targets: &[f64],
    node_cols: Vec<Vec<u32>>,
    depth: usize,
    params: &TreeParams,
) -> TreeNode {
    let rows = &node_cols[0];
    let m = rows.len();
    let total = node_total(targets, rows);
    let make_leaf = || TreeNode::Leaf {
        value: total / (m as f64 + params.lambda_leaf),
    };
    if depth >= params.max_depth || m < 2 * params.min_samples_leaf {
        return make_leaf();
    }
    // Constant targets carry no gain; short-circuit so float rounding in
    // the gain sums cannot manufacture a spurious split.
    let first = targets[rows[0] as usize];
    if rows.iter().all(|&i| targets[i as usize] == first) {
        return make_leaf();
    }

    let Some(split) = best_split(ws, targets, &node_cols, total, params) else {
        return make_leaf();
    };

    // Partition every feature list by the chosen predicate, preserving
    // each list's value order.
    let split_col = &ws.columns[split.feature];
    let mut left_cols = Vec::with_capacity(node_cols.len());
    let mut right_cols = Vec::with_capacity(node_cols.len());
    for col in &node_cols {
        let mut left = Vec::with_capacity(split.n_left);
        let mut right = Vec::with_capacity(m - split.n_left);
        for &i in col {
            if split_col[i as usize] <= split.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        left_cols.push(left);
        right_cols.push(right);
    }
    drop(node_cols);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(ws, targets, left_cols, depth + 1, params)),
        right: Box::new(grow(ws, targets, right_cols, depth + 1, params)),
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

/// Score of a leaf predicting its shrunk mean: sum^2 / (n + lambda).
/// Gain of a split is score(left) + score(right) - score(parent).
fn best_split(
    ws: &TreeWorkspace,
    targets: &[f64],
    node_cols: &[Vec<u32>],
    total: f64,
    params: &TreeParams,
) -> Option<SplitCandidate> {
    let m = node_cols[0].len();
    let lambda = params.lambda_leaf;
    let parent_score = total * total / (m as f64 + lambda);

    let mut best: Option<SplitCandidate> = None;
    let mut run_targets: Vec<f64> = Vec::new();
    for (feature, col) in node_cols.iter().enumerate() {
        let values = &ws.columns[feature];
        let value_of = |i: usize| values[col[i] as usize];
        let mut left_sum = 0.0;
        let mut start = 0;
        while start < m {
            // run of equal feature values [start, end)
            let v = value_of(start);
            let mut end = start + 1;
            while end < m && value_of(end) == v {
                end += 1;
            }
            // target-ascending run sum keeps the prefix canonical under
            // row permutation
            if end - start == 1 {
                left_sum += targets[col[start] as usize];
            } else {
                run_targets.clear();
                run_targets.extend(col[start..end].iter().map(|&i| targets[i as usize]));
                run_targets.sort_unstable_by(f64::total_cmp);
                left_sum += run_targets.iter().sum::<f64>();
            }
            if end == m {
                break;
            }
            if end >= params.min_samples_leaf && m - end >= params.min_samples_leaf {
                let n_left = end as f64;
                let n_right = (m - end) as f64;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / (n_left + lambda)
                    + right_sum * right_sum / (n_right + lambda)
                    - parent_score;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature,
                        threshold: 0.5 * (v + value_of(end)),
                        gain,
                        n_left: end,
                    });
                }
            }
            start = end;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(max_depth: usize, min_samples_leaf: usize, lambda_leaf: f64) -> TreeParams {
        TreeParams {
            max_depth,
            min_samples_leaf,
            lambda_leaf,
        }
    }

    fn single_feature(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn constant_targets_yield_single_leaf() {
        let x = single_feature(&[0.0, 1.0, 2.0, 3.0]);
        let tree = fit_tree(&x, &[2.5, 2.5, 2.5, 2.5], &params(4, 1, 0.5)).unwrap();
        match tree {
            TreeNode::Leaf { value } => {
                // sum / (n + lambda) = 10 / 4.5
                assert!((value - 10.0 / 4.5).abs() < 1e-15, "leaf value {value}");
            }
            other => panic!("expected leaf, got {other:?}"),
        }
    }

    #[test]
    fn depth_one_splits_between_sign_change() {
        // Enumerating the three candidate thresholds by hand:
        //   0.5 -> gain 1/1 + 1/3  - 0 = 4/3
        //   1.5 -> gain 4/2 + 4/2  - 0 = 4
        //   2.5 -> gain 1/3 + 1/1  - 0 = 4/3
        let x = single_feature(&[0.0, 1.0, 2.0, 3.0]);
        let g = [-1.0, -1.0, 1.0, 1.0];
        let tree = fit_tree(&x, &g, &params(1, 1, 0.0)).unwrap();
        match &tree {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
                assert_eq!(**left, TreeNode::Leaf { value: -1.0 });
                assert_eq!(**right, TreeNode::Leaf { value: 1.0 });
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn min_samples_leaf_equal_to_n_forces_leaf() {
        let x = single_feature(&[0.0, 1.0, 2.0, 3.0]);
        let g = [-1.0, -1.0, 1.0, 1.0];
        let tree = fit_tree(&x, &g, &params(3, 4, 0.0)).unwrap();
        assert!(matches!(tree, TreeNode::Leaf { .. }));
    }

    #[test]
    fn single_row_is_a_leaf_with_its_target() {
        let tree = fit_tree(&[vec![7.0]], &[3.25], &params(2, 1, 0.0)).unwrap();
        assert_eq!(tree, TreeNode::Leaf { value: 3.25 });
    }

    #[test]
    fn empty_input_rejected() {
        let err = fit_tree(&[], &[], &params(2, 1, 0.0)).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn respects_max_depth() {
        let x = single_feature(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let g = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let tree = fit_tree(&x, &g, &params(2, 1, 0.0)).unwrap();
        assert!(tree.depth() <= 2);
        assert!(tree.n_leaves() <= 4);
    }

    #[test]
    fn ties_broken_by_lowest_feature_index() {
        // Feature 1 duplicates feature 0, so every split gain is matched;
        // the kept split must reference feature 0.
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ];
        let g = [-1.0, -1.0, 1.0, 1.0];
        let tree = fit_tree(&x, &g, &params(1, 1, 0.0)).unwrap();
        match tree {
            TreeNode::Split { feature, .. } => assert_eq!(feature, 0),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn tied_feature_values_stay_together() {
        // value 1.0 appears three times with mixed targets; no threshold
        // may separate the copies
        let x = single_feature(&[0.0, 1.0, 1.0, 1.0, 2.0]);
        let g = [0.0, -3.0, 5.0, -3.0, 10.0];
        let tree = fit_tree(&x, &g, &params(3, 1, 0.0)).unwrap();
        let p = |v: f64| tree.predict(&[v]);
        assert_eq!(p(1.0), (-3.0 + 5.0 - 3.0) / 3.0);
        assert_eq!(p(0.0), 0.0);
        assert_eq!(p(2.0), 10.0);
    }
}
