use thiserror::Error;

/// Errors raised by the estimation, selection and ingestion routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("fit failed after {restarts} restart(s): {diagnostics}")]
    FitFailure { restarts: usize, diagnostics: String },

    #[error("model selection failed: {0}")]
    SelectionFailure(String),

    #[error("ingest failed: {0}")]
    IngestFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
