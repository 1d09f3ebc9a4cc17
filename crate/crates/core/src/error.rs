use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {what} = {value} exceeds {limit}")]
    IndexOutOfRange {
        what: &'static str,
        value: i64,
        limit: i64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("invalid triad: {0}")]
    InvalidTriad(String),
    #[error("grid resolution error: {0}")]
    Resolution(String),
    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),
    #[error("instability at step {step} (t = {t}): energy grew by a factor {growth:.3e}")]
    Instability { step: usize, t: f64, growth: f64 },
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
