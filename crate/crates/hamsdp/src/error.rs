use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("missing covering number F({m},{k})")]
    MissingCoveringNumber { m: i64, k: i64 },
    #[error("zero denominator in linear inequality bound")]
    ZeroDenominator,
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("certificate rejected: {0}")]
    Certificate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
