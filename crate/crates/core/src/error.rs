use thiserror::Error;

/// Errors produced by scenario generation, the estimators and the harness.
#[derive(Debug, Error)]
pub enum JuiceError {
    /// A configuration value violates a documented constraint.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A Gaussian belief could not be formed (singular or indefinite covariance).
    #[error("degenerate belief: {0}")]
    DegenerateBelief(String),

    /// A linear solve failed even after jitter repair. Aborts the trial.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, JuiceError>;

impl JuiceError {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        JuiceError::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
