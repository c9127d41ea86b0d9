use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("characteristic {0} is not an odd prime")]
    BadCharacteristic(u64),
    #[error("extension degree must be at least 1, got {0}")]
    BadDegree(i64),
    #[error("field order {order} exceeds the supported limit {limit}")]
    FieldTooLarge { order: u64, limit: u64 },
    #[error("cannot parse field description {0:?} (expected \"p^l\" or a prime power)")]
    FieldParse(String),
    #[error("zero has no multiplicative inverse")]
    DivisionByZero,
    #[error("dimension {d} is not supported here: {reason}")]
    BadDimension { d: usize, reason: String },
    #[error("enumeration of {what} needs {size} items, above the cap {cap}")]
    CapExceeded { what: String, size: u128, cap: u128 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("exponent {0} is below 1")]
    BadExponent(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
