use thiserror::Error;

/// Errors raised across the estimation and testing pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GarchError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty series")]
    EmptySeries,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("volatility recursion diverged at t = {t} (sigma2 = {value:e})")]
    Divergence { t: usize, value: f64 },

    #[error("argument {0} outside the open unit interval")]
    Domain(f64),

    #[error("QML fit failed: {reason} (best objective {best_objective})")]
    FitFailure {
        reason: String,
        best_objective: f64,
        best_params: Vec<f64>,
    },

    #[error("fit failed for group {group}: {source}")]
    GroupFit {
        group: usize,
        #[source]
        source: Box<GarchError>,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("covariance estimation failed: {0}")]
    Covariance(String),
}

pub type Result<T> = std::result::Result<T, GarchError>;
