use thiserror::Error;

use crate::dynamics::FixedPointDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma function pole at x = {0}")]
    Pole(f64),

    #[error("overflow evaluating {what} at {at}")]
    Overflow { what: &'static str, at: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("{what} did not reach its accuracy target ({detail})")]
    NonConvergence { what: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("delay hypothesis violated: delay({t}) = {delayed} is outside [0, {t}]")]
    FutureAccess { t: f64, delayed: f64 },

    #[error("gramian invariant violated: {0}")]
    Gramian(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("Picard iteration did not converge after {} iterations", .0.iterations)]
    PicardDivergence(Box<FixedPointDiagnostics>),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
