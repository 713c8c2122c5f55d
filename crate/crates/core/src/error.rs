use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid UE position: {0}")]
    InvalidPosition(String),

    #[error("degenerate position: UE coincides with element {element} (distance {distance:e} m)")]
    DegeneratePosition { element: usize, distance: f64 },

    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("zero gain at the center subcarrier")]
    ZeroCenterGain,

    #[error("measurement failed: {0}")]
    Measurement(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
