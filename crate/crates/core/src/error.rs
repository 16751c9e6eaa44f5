use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid censoring plan: {0}")]
    InvalidPlan(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// Every observed cause is masked, so the rate split is not identifiable.
    #[error("non-identifiable: {0}")]
    NonIdentifiable(String),

    #[error("fixed-point iteration for alpha did not converge after {iterations} steps (trace tail: {trace:?})")]
    NoConvergence { iterations: usize, trace: Vec<f64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("diagnostic undefined: {0}")]
    Diagnostic(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
