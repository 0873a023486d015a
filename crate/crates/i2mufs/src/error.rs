//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by dataset handling, graph construction and the solver.
#[derive(Debug, Error)]
pub enum Error {
    /// File could not be read or written.
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Manifest or report JSON was malformed.
    #[error("json error")]
    Json(#[from] serde_json::Error),

    /// A CSV cell could not be parsed as a number.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Input data violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Shapes of related matrices disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A hyperparameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A view's first instances are all missing, so no mean exists yet.
    #[error("cold start: view {view} has no observed instance to impute from")]
    ColdStartView { view: usize },

    /// The weighted consensus denominator vanished for some instance row.
    #[error("degenerate consensus: zero weight sum at instance row {row}")]
    DegenerateConsensus { row: usize },

    /// An update produced NaN or infinity, signalling divergence.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    /// A checkpoint blob has an unknown schema version.
    #[error("unsupported checkpoint schema {found} (expected {expected})")]
    CheckpointSchema { found: u32, expected: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
