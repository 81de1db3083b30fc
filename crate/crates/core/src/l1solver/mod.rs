//! L1-penalized estimation: Lasso (squared loss) and logistic regression by
//! coordinate descent, plus λ paths and cross-validated λ selection.
//!
//! Columns are standardized internally (population mean and standard
//! deviation) and the penalty applies to the standardized coefficients.
//! Coefficients are reported on the original scale. The intercept is never
//! penalized; individual columns can be exempted through the design's
//! penalty mask.

mod cv;
mod design;
mod lasso;
mod logistic;

pub use cv::{cv_select_lambda, stratified_folds, CvCriterion, CvOptions, CvPath};
pub use design::{DesignMatrix, Standardization};
pub use lasso::{lasso_fit, lasso_kkt_violation, lasso_lambda_max, GramLasso, LassoOptions, PreparedResponse};
pub use logistic::{
    logistic_kkt_violation, logistic_l1_fit, logistic_lambda_max, logistic_objective, LogisticOptions, LogisticSolver,
    COEFFICIENT_CAP,
};

pub(crate) use logistic::sigmoid;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// A fitted L1-penalized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    /// Original-scale coefficients, one per design column.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final penalized objective on the standardized scale.
    pub objective: f64,
    pub standardization: Standardization,
    pub std_intercept: f64,
    pub std_coefficients: Vec<f64>,
    /// Set when a standardized coefficient hit [`COEFFICIENT_CAP`]
    /// (quasi-separation).
    pub capped: bool,
}

impl FitResult {
    fn from_standardized(
        std_intercept: f64,
        std_coefficients: Vec<f64>,
        standardization: Standardization,
        lambda: f64,
    ) -> Self {
        let (intercept, coefficients) = standardization.to_original(std_intercept, &std_coefficients);
        FitResult {
            intercept,
            coefficients,
            lambda,
            converged: false,
            iterations: 0,
            objective: f64::NAN,
            standardization,
            std_intercept,
            std_coefficients,
            capped: false,
        }
    }

    /// Linear predictor from the original-scale coefficients.
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Linear predictor evaluated through the standardized representation.
    pub fn linear_predictor_standardized(&self, row: &[f64]) -> f64 {
        let s = &self.standardization;
        self.std_intercept
            + self
                .std_coefficients
                .iter()
                .enumerate()
                .map(|(j, b)| if *b == 0.0 { 0.0 } else { b * (row[j] - s.mean[j]) / s.scale[j] })
                .sum::<f64>()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }
}

pub(crate) fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// `count` log-spaced values from `max` down to `max · min_ratio`.
pub fn lambda_path(max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![max];
    }
    let log_max = libm::log(max);
    let log_min = libm::log(max * min_ratio);
    (0..count)
        .map(|k| if k == 0 { max } else { libm::exp(log_max + (log_min - log_max) * k as f64 / (count - 1) as f64) })
        .collect()
}
