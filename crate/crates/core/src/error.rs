use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum RipError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid factor pair: {0}")]
    InvalidFactorPair(String),

    #[error("XX^T equals ZZ^T: the error vector is zero")]
    ZeroErrorVector,

    #[error("sigma_min(X) is zero: beta degenerates and the lower bound is 1")]
    DegenerateBeta,

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("stationarity condition violated (residual {0:e})")]
    StationarityViolated(f64),

    #[error("ordering violated: {0}")]
    OrderingViolated(String),

    #[error("solver stalled after {iterations} Newton steps: {reason}")]
    SolverStall { iterations: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RipError>;
