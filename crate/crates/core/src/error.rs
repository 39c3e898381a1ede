//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("graph contains a cycle through node {node}")]
    Cycle { node: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Prefixes the message with the order-search step that triggered it,
    /// keeping the variant (and therefore the caller's error classification).
    pub(crate) fn with_step(self, step: usize) -> Error {
        let tag = |m: String| format!("order step {step}: {m}");
        match self {
            Error::DegenerateData(m) => Error::DegenerateData(tag(m)),
            Error::Numerical(m) => Error::Numerical(tag(m)),
            Error::InvalidConfig(m) => Error::InvalidConfig(tag(m)),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
