//! Error type shared across the crate.

/// Errors raised by matrix construction, the wire codec, and protocol runs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("entry out of range: {0}")]
    EntryOutOfRange(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("malformed wire data: {0}")]
    Wire(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
