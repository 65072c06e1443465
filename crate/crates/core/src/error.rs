//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("chart mismatch: expected variables {expected:?}, got {got:?}")]
    ChartMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("division by zero polynomial")]
    ZeroDenominator,

    #[error("pole: {0}")]
    Pole(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("basis is not closed: bracket of elements {0} and {1} escapes the span")]
    NotClosed(usize, usize),

    #[error("{0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
