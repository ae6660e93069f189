//! Classifier fitting: L1-penalized logistic regression by coordinate
//! descent, and a CART random forest.

mod forest;
pub(crate) mod lasso;

pub use forest::{fit_forest, forest_importance, predict_proba_forest, ForestFit, Node, Tree};
pub use lasso::{
    fit_lasso_logistic, lambda_grid, lambda_max, lasso_path_select, predict_proba_lasso, top_coefficients,
    LambdaSelection, LassoFit, TopCoefficients,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("feature matrix contains non-finite values")]
    NonFinite,
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("model columns do not match the feature matrix (first difference at column {index})")]
    ColumnMismatch { index: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoParams {
    /// Points in the default λ grid.
    pub n_lambda: usize,
    /// Smallest grid λ as a fraction of λ_max.
    pub lambda_min_ratio: f64,
    pub inner_folds: usize,
    /// Convergence threshold on the largest coefficient change.
    pub tolerance: f64,
    /// Cap on outer (reweighting) iterations per λ.
    pub max_iter: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams { n_lambda: 50, lambda_min_ratio: 1e-4, inner_folds: 5, tolerance: 1e-6, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    /// `floor(sqrt(p))`, at least 1.
    Sqrt,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    /// `None` grows until min_leaf or purity stops a branch.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 500, mtry: Mtry::Sqrt, max_depth: None, min_leaf: 5, bootstrap: true }
    }
}

impl ForestParams {
    pub fn mtry_for(&self, p: usize) -> usize {
        match self.mtry {
            Mtry::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            Mtry::Fixed(m) => m.clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lasso: LassoParams,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidParam(m.to_string()));
        let l = &self.lasso;
        if l.n_lambda < 1 || l.max_iter < 1 {
            return bad("lasso counts must be at least 1");
        }
        if l.inner_folds < 2 {
            return bad("inner_folds must be at least 2");
        }
        if !(l.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(l.lambda_min_ratio > 0.0 && l.lambda_min_ratio <= 1.0) {
            return bad("lambda_min_ratio must lie in (0, 1]");
        }
        let f = &self.forest;
        if f.n_trees < 1 || f.min_leaf < 1 || f.max_depth == Some(0) || f.mtry == Mtry::Fixed(0) {
            return bad("forest counts must be at least 1");
        }
        Ok(())
    }
}

fn check_inputs(x: &crate::features::FeatureMatrix, y: &[bool]) -> Result<(), LearnError> {
    if x.n_rows() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.n_rows(), labels: y.len() });
    }
    if x.matrix.values().iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(LearnError::DegenerateLabels);
    }
    Ok(())
}

fn check_columns(expected: &[String], x: &crate::features::FeatureMatrix) -> Result<(), LearnError> {
    if expected.len() != x.columns.len() {
        return Err(LearnError::ColumnMismatch { index: expected.len().min(x.columns.len()) });
    }
    match expected.iter().zip(&x.columns).position(|(a, b)| a != b) {
        Some(index) => Err(LearnError::ColumnMismatch { index }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(Hyperparams::default().validate().is_ok());
        let mut h = Hyperparams::default();
        h.lasso.tolerance = 0.0;
        assert!(h.validate().is_err());
        let mut h = Hyperparams::default();
        h.forest.n_trees = 0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn mtry_rule() {
        let f = ForestParams::default();
        assert_eq!(f.mtry_for(100), 10);
        assert_eq!(f.mtry_for(99), 9);
        assert_eq!(f.mtry_for(1), 1);
    }
}
