use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invariant violated ({check}) at index {index}: {detail}")]
    Invariant {
        check: &'static str,
        index: usize,
        detail: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("ground state changes sign: {0}")]
    SignChange(String),

    #[error("no eigenvalue bracket found: {0}")]
    Bracket(String),

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("test function not admissible: {0}")]
    Admissibility(String),

    #[error("field/mesh mismatch: {0}")]
    Mismatch(String),

    #[error("outside theorem hypotheses: {0}")]
    HypothesisRange(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
