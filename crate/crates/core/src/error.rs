use thiserror::Error;

/// Errors raised by the numerical core, the environments and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid basis vector: {0}")]
    InvalidBasis(String),

    #[error("invalid weight belief: {0}")]
    InvalidBelief(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    /// A quadratic form came out below the round-off clamp, meaning the
    /// covariance is no longer positive semi-definite.
    #[error("negative variance {0:e}: covariance is not positive semi-definite")]
    NegativeVariance(f64),

    /// Total predicted variance `phi' Sigma phi + eps` was not positive.
    #[error("degenerate update: total variance {0:e} is not positive")]
    DegenerateUpdate(f64),

    #[error("invalid action {action}: environment has {count} actions")]
    InvalidAction { action: usize, count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
