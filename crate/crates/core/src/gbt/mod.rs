//! Gradient-boosted regression trees with first-order updates.
//!
//! The ensemble prediction is `base + gamma * sum(tree_t(x))`. Each round
//! fits a tree to the per-sample negative gradient of the loss and the
//! learning rate `gamma` scales the tree's contribution. Squared error
//! drives the regression task, the logistic loss drives binary
//! classification. Only first-order information is used: split gains carry
//! no Hessian weighting, and regularization is L2 leaf shrinkage plus the
//! depth and leaf-size limits.
//!
//! For squared error the fitted residual target is `y - yhat` (the negative
//! gradient rescaled by its constant curvature), so a full-step `gamma = 1`
//! fit places each leaf at the exact residual mean instead of doubling it.

mod tree;

pub use tree::{fit_tree, TreeNode, TreeParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp applied to the mean class rate before taking its logit.
const BASE_RATE_CLAMP: f64 = 1e-6;

/// Which loss the ensemble optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    BinaryClassification,
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Learning rate, in (0, 1].
    pub gamma: f64,
    /// L2 leaf shrinkage, >= 0.
    pub lambda_leaf: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            max_depth: 4,
            min_samples_leaf: 5,
            gamma: 0.1,
            lambda_leaf: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::InvalidParameter("n_rounds must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.lambda_leaf < 0.0 || !self.lambda_leaf.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda_leaf must be finite and >= 0, got {}",
                self.lambda_leaf
            )));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            lambda_leaf: self.lambda_leaf,
        }
    }
}

/// A fitted additive ensemble of regression trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub task: Task,
    pub base_prediction: f64,
    pub gamma: f64,
    pub trees: Vec<TreeNode>,
    /// Training loss before any tree, then after each round.
    pub train_loss: Vec<f64>,
    n_features: usize,
}

/// Total squared error `sum((y_i - yhat_i)^2)`.
pub fn squared_loss(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    Ok(y
        .iter()
        .zip(yhat)
        .map(|(yi, pi)| (yi - pi) * (yi - pi))
        .sum())
}

/// Total logistic loss `sum(y*ln(1+e^-s) + (1-y)*ln(1+e^s))` over raw scores.
pub fn logistic_loss(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    check_binary(y)?;
    Ok(y
        .iter()
        .zip(yhat)
        .map(|(&yi, &si)| yi * softplus(-si) + (1.0 - yi) * softplus(si))
        .sum())
}

/// Per-sample `dL/dyhat_i`: `-2(y - yhat)` for regression,
/// `sigmoid(yhat) - y` for classification.
pub fn loss_gradient(task: Task, y: &[f64], yhat: &[f64]) -> Result<Vec<f64>> {
    check_lengths(y, yhat)?;
    match task {
        Task::Regression => Ok(y.iter().zip(yhat).map(|(yi, pi)| -2.0 * (yi - pi)).collect()),
        Task::BinaryClassification => {
            check_binary(y)?;
            Ok(y.iter().zip(yhat).map(|(yi, &si)| sigmoid(si) - yi).collect())
        }
    }
}

/// Compare the analytic gradient against central finite differences of the
/// loss; returns the largest absolute deviation over all coordinates.
pub fn gradient_check(task: Task, y: &[f64], yhat: &[f64], epsilon: f64) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let analytic = loss_gradient(task, y, yhat)?;
    let loss = |scores: &[f64]| match task {
        Task::Regression => squared_loss(y, scores),
        Task::BinaryClassification => logistic_loss(y, scores),
    };
    let mut probe = yhat.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..probe.len() {
        let original = probe[i];
        probe[i] = original + epsilon;
        let up = loss(&probe)?;
        probe[i] = original - epsilon;
        let down = loss(&probe)?;
        probe[i] = original;
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max((numeric - analytic[i]).abs());
    }
    Ok(worst)
}

/// Fit a boosted ensemble.
///
/// The base prediction is the target mean (its clamped logit for
/// classification); each round fits a tree to the negative gradient and
/// adds `gamma` times its output to the running predictions.
pub fn fit(x: &[Vec<f64>], y: &[f64], task: Task, params: &Hyperparams) -> Result<BoostedEnsemble> {
    params.validate()?;
    check_lengths_named(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "boosting requires at least 2 rows, got {}",
            x.len()
        )));
    }
    if task == Task::BinaryClassification {
        check_binary(y)?;
    }
    let n_features = x[0].len();

    // canonical-order sum: the base must not move under row permutation
    let mean = {
        let mut sorted = y.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        sorted.iter().sum::<f64>() / y.len() as f64
    };
    let base_prediction = match task {
        Task::Regression => mean,
        Task::BinaryClassification => {
            let p = mean.clamp(BASE_RATE_CLAMP, 1.0 - BASE_RATE_CLAMP);
            (p / (1.0 - p)).ln()
        }
    };

    let mut yhat = vec![base_prediction; y.len()];
    let mut train_loss = Vec::with_capacity(params.n_rounds + 1);
    let loss = |scores: &[f64]| match task {
        Task::Regression => squared_loss(y, scores),
        Task::BinaryClassification => logistic_loss(y, scores),
    };
    train_loss.push(loss(&yhat)?);

    let tree_params = params.tree_params();
    let workspace = tree::TreeWorkspace::new(x);
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut residual = vec![0.0; y.len()];
    for _ in 0..params.n_rounds {
        for (r, (yi, pi)) in residual.iter_mut().zip(y.iter().zip(&yhat)) {
            *r = match task {
                Task::Regression => yi - pi,
                Task::BinaryClassification => yi - sigmoid(*pi),
            };
        }
        let tree = tree::fit_tree_with(&workspace, x, &residual, &tree_params)?;
        for (pi, row) in yhat.iter_mut().zip(x) {
            *pi += params.gamma * tree.predict(row);
        }
        trees.push(tree);
        train_loss.push(loss(&yhat)?);
    }

    Ok(BoostedEnsemble {
        task,
        base_prediction,
        gamma: params.gamma,
        trees,
        train_loss,
        n_features,
    })
}

impl BoostedEnsemble {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Raw additive score `base + gamma * sum(tree(x))`.
    pub fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(row) = x.iter().find(|row| row.len() != self.n_features) {
            return Err(Error::DimensionMismatch(format!(
                "trained on {} features, query row has {}",
                self.n_features,
                row.len()
            )));
        }
        Ok(x.iter()
            .map(|row| {
                self.base_prediction
                    + self.gamma * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
            })
            .collect())
    }

    /// Class-1 probability `sigmoid(raw)`.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.predict_raw(x)?.into_iter().map(sigmoid).collect())
    }

    /// Hard labels at the 0.5 probability threshold.
    pub fn predict_class(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow for large |x|.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<()> {
    check_lengths_named(y.len(), yhat.len())
}

fn check_lengths_named(n_y: usize, n_yhat: usize) -> Result<()> {
    if n_y != n_yhat {
        return Err(Error::DimensionMismatch(format!(
            "{n_y} targets vs {n_yhat} predictions"
        )));
    }
    Ok(())
}

fn check_binary(y: &[f64]) -> Result<()> {
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::InvalidParameter(format!(
            "classification targets must be 0 or 1, got {bad}"
        )));
    }
    Ok(())
}
