use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: wrong dimension, violated precondition, malformed config.
    #[error("usage error: {0}")]
    Usage(String),
    /// A solver or integrator could not produce a result.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return usage(format!("dimension mismatch: expected {expected}, got {got}"));
    }
    Ok(())
}
