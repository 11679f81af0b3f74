//! Classical comparison models: the single-ended impedance locator,
//! ordinary least squares, k-nearest-neighbor regression, and a single
//! decision tree.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbt::{fit_tree, TreeNode, TreeParams};

/// Single-ended measurements feeding the impedance locator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceInputs {
    /// Terminal voltage (V).
    pub v_s: f64,
    /// Terminal current (A).
    pub i_s: f64,
    /// Fault current (A); single-ended relays cannot observe it, so blind
    /// evaluation substitutes `i_s`.
    pub i_f: f64,
    /// Assumed fault resistance (ohm).
    pub r_f_assumed: f64,
    /// Total line impedance magnitude over the path (ohm).
    pub z_total: f64,
    /// Path length (km).
    pub line_length: f64,
}

/// Distance estimate from `v_s = m * z_total * i_s + r_f * i_f`,
/// solved for the per-unit location `m` and scaled to km.
///
/// `m` is deliberately not clamped: out-of-range values are how the
/// method signals its own breakdown and they are reported as-is.
pub fn impedance_locate(inputs: &ImpedanceInputs) -> Result<f64> {
    if inputs.i_s == 0.0 {
        return Err(Error::InvalidParameter(
            "impedance locator needs a nonzero terminal current".into(),
        ));
    }
    if !inputs.z_total.is_finite() || inputs.z_total <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "z_total must be strictly positive, got {}",
            inputs.z_total
        )));
    }
    let m = (inputs.v_s - inputs.r_f_assumed * inputs.i_f) / (inputs.z_total * inputs.i_s);
    Ok(m * inputs.line_length)
}

/// Linear model fit by the normal equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Minimize `sum((y - X w - b)^2)`. When the normal matrix is singular
/// (e.g. duplicated columns), a ridge jitter `eps * I` is added and grown
/// until the factorization succeeds, which converges to the minimum-norm
/// solution.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Result<OlsModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("OLS requires at least one row".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch("ragged feature rows".into()));
    }
    let n = x.len();
    // augmented design matrix [X | 1]
    let mut a = DMatrix::<f64>::zeros(n, d + 1);
    for (i, row) in x.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a[(i, j)] = v;
        }
        a[(i, d)] = 1.0;
    }
    let yv = DVector::from_column_slice(y);
    let normal = a.transpose() * &a;
    let rhs = a.transpose() * yv;

    let scale = normal.diagonal().sum() / (d + 1) as f64;
    let mut jitter = 0.0;
    for _ in 0..40 {
        let mut m = normal.clone();
        if jitter > 0.0 {
            for j in 0..=d {
                m[(j, j)] += jitter;
            }
        }
        if let Some(chol) = m.cholesky() {
            let sol = chol.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return Ok(OlsModel {
                    weights: sol.as_slice()[..d].to_vec(),
                    intercept: sol[d],
                });
            }
        }
        jitter = if jitter == 0.0 {
            scale.max(1.0) * 1e-10
        } else {
            jitter * 10.0
        };
    }
    Err(Error::ModelFailure(
        "OLS normal equations unsolvable even with jitter".into(),
    ))
}

impl OlsModel {
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "OLS fitted on {} features, row has {}",
                self.weights.len(),
                row.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(row)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.intercept)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Stored training set for k-nearest-neighbor regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub k: usize,
}

pub fn knn_fit(x: Vec<Vec<f64>>, y: Vec<f64>, k: usize) -> Result<KnnModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("kNN requires a training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if k == 0 || k > x.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {}], got {k}",
            x.len()
        )));
    }
    Ok(KnnModel { x, y, k })
}

impl KnnModel {
    /// Mean target of the k nearest rows by Euclidean distance; distance
    /// ties resolve to the lower row index.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.x[0].len() {
            return Err(Error::DimensionMismatch(format!(
                "kNN fitted on {} features, row has {}",
                self.x[0].len(),
                row.len()
            )));
        }
        let mut by_distance: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let sum: f64 = by_distance[..self.k].iter().map(|&(_, i)| self.y[i]).sum();
        Ok(sum / self.k as f64)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// A single regression tree fit directly to the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
}

pub fn dtree_fit(
    x: &[Vec<f64>],
    y: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<TreeModel> {
    let root = fit_tree(
        x,
        y,
        &TreeParams {
            max_depth,
            min_samples_leaf,
            lambda_leaf: 0.0,
        },
    )?;
    Ok(TreeModel { root })
}

impl TreeModel {
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.root.predict(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locator_zero_distance_when_voltage_is_fault_drop() {
        let inputs = ImpedanceInputs {
            v_s: 500.0,
            i_s: 100.0,
            i_f: 50.0,
            r_f_assumed: 10.0,
            z_total: 32.06,
            line_length: 1000.0,
        };
        assert_eq!(impedance_locate(&inputs).unwrap(), 0.0);
    }

    #[test]
    fn locator_recovers_midpoint() {
        // v_s = 0.5 * 32.06 * 1000 + 10 * 1000 = 26030
        let inputs = ImpedanceInputs {
            v_s: 26_030.0,
            i_s: 1000.0,
            i_f: 1000.0,
            r_f_assumed: 10.0,
            z_total: 32.06,
            line_length: 1000.0,
        };
        let d = impedance_locate(&inputs).unwrap();
        assert!((d - 500.0).abs() < 1e-9, "distance {d}");
    }

    #[test]
    fn locator_bias_matches_mismatch_formula() {
        // true R_F = 10, assumed 0: error = dR * i_f / (z * i_s) * length
        let inputs = ImpedanceInputs {
            v_s: 26_030.0,
            i_s: 1000.0,
            i_f: 1000.0,
            r_f_assumed: 0.0,
            z_total: 32.06,
            line_length: 1000.0,
        };
        let d = impedance_locate(&inputs).unwrap();
        let bias = 10.0 * 1000.0 / (32.06 * 1000.0) * 1000.0; // 311.915... km
        assert!((d - (500.0 + bias)).abs() < 1e-9, "distance {d}");
        assert!((bias - 311.915).abs() < 1e-2);
    }

    #[test]
    fn locator_rejects_degenerate_inputs() {
        let mut inputs = ImpedanceInputs {
            v_s: 1.0,
            i_s: 0.0,
            i_f: 1.0,
            r_f_assumed: 0.0,
            z_total: 32.06,
            line_length: 1000.0,
        };
        assert!(impedance_locate(&inputs).is_err());
        inputs.i_s = 1.0;
        inputs.z_total = 0.0;
        assert!(impedance_locate(&inputs).is_err());
    }

    #[test]
    fn ols_recovers_affine_target() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, (i * i) as f64 * 0.1])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] + 7.0).collect();
        let model = ols_fit(&x, &y).unwrap();
        assert!((model.weights[0] - 3.0).abs() < 1e-8);
        assert!((model.weights[1] + 2.0).abs() < 1e-8);
        assert!((model.intercept - 7.0).abs() < 1e-8);
        let preds = model.predict(&x).unwrap();
        let residual: f64 = preds
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
        assert!(residual < 1e-8, "residual {residual}");
    }

    #[test]
    fn ols_constant_target_is_intercept_only() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![4.25; 10];
        let model = ols_fit(&x, &y).unwrap();
        assert!(model.weights[0].abs() < 1e-10);
        assert!((model.intercept - 4.25).abs() < 1e-10);
    }

    #[test]
    fn ols_duplicated_column_matches_pseudoinverse() {
        // 5 rows, feature duplicated: the normal matrix is singular. The
        // jittered solve must reproduce the minimum-norm predictions, taken
        // here from an SVD pseudoinverse oracle.
        let x: Vec<Vec<f64>> = vec![
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
            vec![4.0, 4.0],
            vec![5.0, 5.0],
        ];
        let y = vec![2.0, 4.1, 5.9, 8.2, 9.8];
        let model = ols_fit(&x, &y).unwrap();
        assert!(model.weights.iter().all(|w| w.is_finite()));

        let mut a = DMatrix::<f64>::zeros(5, 3);
        for (i, row) in x.iter().enumerate() {
            a[(i, 0)] = row[0];
            a[(i, 1)] = row[1];
            a[(i, 2)] = 1.0;
        }
        let pinv = a.clone().svd(true, true).pseudo_inverse(1e-12).unwrap();
        let w = pinv * DVector::from_column_slice(&y);
        for (i, row) in x.iter().enumerate() {
            let oracle = w[0] * row[0] + w[1] * row[1] + w[2];
            let got = model.predict_row(row).unwrap();
            assert!((got - oracle).abs() < 1e-4, "row {i}: {got} vs {oracle}");
        }
    }

    #[test]
    fn ols_optimality_under_weight_perturbation() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, r)| 2.0 * r[0] - r[1] + 0.01 * (i as f64))
            .collect();
        let model = ols_fit(&x, &y).unwrap();
        let sse = |m: &OlsModel| -> f64 {
            m.predict(&x)
                .unwrap()
                .iter()
                .zip(&y)
                .map(|(p, t)| (p - t) * (p - t))
                .sum()
        };
        let base = sse(&model);
        for coord in 0..=x[0].len() {
            for delta in [-1e-3, 1e-3] {
                let mut m = model.clone();
                if coord < m.weights.len() {
                    m.weights[coord] += delta;
                } else {
                    m.intercept += delta;
                }
                assert!(
                    sse(&m) >= base - 1e-12,
                    "perturbing coordinate {coord} by {delta} reduced the error"
                );
            }
        }
    }

    #[test]
    fn knn_all_neighbors_is_global_mean() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let model = knn_fit(x, y, 5).unwrap();
        assert_eq!(model.predict_row(&[100.0]).unwrap(), 3.0);
    }

    #[test]
    fn knn_exact_match_with_k1() {
        let x: Vec<Vec<f64>> = vec![vec![0.0], vec![5.0], vec![9.0]];
        let y = vec![10.0, 50.0, 90.0];
        let model = knn_fit(x, y, 1).unwrap();
        assert_eq!(model.predict_row(&[5.0]).unwrap(), 50.0);
    }

    #[test]
    fn knn_two_nearest_average() {
        // distances from the query 0: {1, 2, 3} -> picks targets 10, 20
        let x: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![10.0, 20.0, 30.0];
        let model = knn_fit(x, y, 2).unwrap();
        assert_eq!(model.predict_row(&[0.0]).unwrap(), 15.0);
    }

    #[test]
    fn knn_predictions_bounded_by_targets() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin()]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64) * 3.7 - 20.0).collect();
        let (lo, hi) = (
            y.iter().cloned().fold(f64::INFINITY, f64::min),
            y.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let model = knn_fit(x, y, 4).unwrap();
        for q in [-2.0, -0.5, 0.0, 0.31, 2.0] {
            let p = model.predict_row(&[q]).unwrap();
            assert!((lo..=hi).contains(&p), "prediction {p} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn knn_rejects_bad_k() {
        let x: Vec<Vec<f64>> = vec![vec![0.0]];
        assert!(knn_fit(x.clone(), vec![1.0], 2).is_err());
        assert!(knn_fit(vec![], vec![], 1).is_err());
    }

    #[test]
    fn dtree_depth_one_splits_step_targets() {
        let x: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![0.0, 0.0, 4.0, 4.0];
        let model = dtree_fit(&x, &y, 1, 1).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn dtree_single_row_is_its_target() {
        let model = dtree_fit(&[vec![1.0]], &[42.0], 3, 1).unwrap();
        assert_eq!(model.predict(&[vec![1.0]]), vec![42.0]);
    }
}
