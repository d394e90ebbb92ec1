use thiserror::Error;

/// Errors raised by the engine. Contract violations (bad shapes, out-of-range
/// indices, non-finite inputs) are reported rather than panicking so that the
/// CLI and the C ABI can map them onto exit/status codes.
#[derive(Debug, Error)]
pub enum QocError {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("memory ledger: {0}")]
    Ledger(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl QocError {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        QocError::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures that stem from floating-point breakdown rather than
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, QocError::NonFinite(_) | QocError::Numerical(_))
    }
}

pub type Result<T, E = QocError> = std::result::Result<T, E>;
