//! Error types shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing column `{0}` in input header")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("bound violation at row {row}, column `{column}`: value {value} outside {bounds}")]
    BoundViolation {
        row: usize,
        column: String,
        value: f64,
        bounds: String,
    },

    #[error("column `{0}` is constant (sample SD = 0)")]
    ConstantColumn(String),

    #[error("dataset too small: n = {0}, need at least {1}")]
    TooFewRows(usize, usize),

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("coordinate descent did not converge after {sweeps} sweeps (max change {max_change:.3e})")]
    NonConvergence { sweeps: usize, max_change: f64 },

    #[error("infinite VIF: predictor `{0}` is perfectly collinear with the others")]
    InfiniteVif(String),

    #[error("scale tag mismatch: expected {expected} coefficients, got {got}")]
    ScaleMismatch { expected: String, got: String },

    #[error("numerical failure in sampler at iteration {iteration}: {detail}")]
    NumericalFailure { iteration: usize, detail: String },

    #[error("adjacency graph is disconnected: {n_components} components {components:?}")]
    DisconnectedGraph {
        n_components: usize,
        components: Vec<Vec<String>>,
    },

    #[error("unknown node label `{0}` in adjacency file")]
    UnknownNode(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("adapter failed in fold {fold}: {source}")]
    FoldFailure {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("duplicate model id `{0}` in comparison")]
    DuplicateModelId(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
