//! Nonparametric regressors — random forest, gradient-boosted trees, BART,
//! and a squared-exponential ARD Gaussian process — plus permutation
//! importance and Monte Carlo sampling Shapley values.

mod bart;
mod forest;
mod gbdt;
mod gp;
mod importance;
mod tree;

pub use bart::{fit_bart, BartConfig, BartFit};
pub use forest::{fit_random_forest, ForestConfig, RandomForest};
pub use gbdt::{fit_gbdt, GbdtConfig, GbdtModel};
pub use gp::{fit_gp, log_marginal_and_grad, GpConfig, GpFit};
pub use importance::{permutation_importance, shapley_sampling, ShapleyValues};
pub use tree::RegressionTree;

/// Anything that maps a covariate row to a scalar prediction.
pub trait Predictor: Sync {
    fn predict_row(&self, row: &[f64]) -> f64;
}

/// Closure wrapper so constructed models (e.g. a known linear function) can
/// feed the importance and Shapley machinery.
pub struct FnPredictor<F: Fn(&[f64]) -> f64 + Sync>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.0)(row)
    }
}
