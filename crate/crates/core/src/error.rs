use thiserror::Error;

/// Errors produced by the detection library and simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration or checkpoint text.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Well-formed input that violates a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Vector or matrix lengths that do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Scalar argument outside the domain of the operation.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// AR model whose 2-D filter fails the stability test.
    #[error("unstable AR model: {0}")]
    Unstable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// True for errors caused by the user's configuration rather than by the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
