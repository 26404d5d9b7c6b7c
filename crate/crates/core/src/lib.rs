//! Small-sample regularized regression and model comparison for a provincial
//! poverty cross-section: penalized linear models, Bayesian shrinkage
//! samplers, spatial diagnostics, tree/GP ensembles, and a strict exact
//! leave-one-out harness over the whole portfolio.

pub mod bayes;
pub mod beta;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod linear;
pub mod ml;
pub mod report;
pub mod spatial;

pub use error::{Error, Result};

/// Bundled reference corpus (34 provinces, 9 predictors).
pub const CORPUS_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/provinces.csv");
