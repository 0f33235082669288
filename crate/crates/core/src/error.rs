use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rank parameter n = {0} is outside the supported range 2..=8")]
    RankOutOfRange(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("invalid differential: {0}")]
    InvalidDifferential(String),

    #[error("metric is not positive definite at node {node}")]
    NotPositiveDefinite { node: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("curvature hypothesis violated: K = {value:.3e} > {limit:.1e} at node {node}")]
    PositiveCurvature { node: usize, value: f64, limit: f64 },

    #[error("second fundamental form inconsistency: |B|^2 = {value:.3e} at node {node}")]
    GaussInconsistency { node: usize, value: f64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("truncated snapshot: expected {expected} payload bytes, found {found} ({missing} missing)")]
    Truncated {
        expected: usize,
        found: usize,
        missing: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
