use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("singular series: {0}")]
    SingularSeries(String),
    #[error("degenerate saddle at {0}")]
    DegenerateSaddle(Complex64),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
