use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition or type invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-positive price {price} at observation {index} of {symbol}")]
    NonPositivePrice {
        symbol: String,
        index: usize,
        price: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// Not enough observations for a computation stage.
    #[error("insufficient data in stage `{stage}`: {detail}")]
    Insufficient { stage: String, detail: String },

    #[error("symbol mismatch: {0}")]
    SymbolMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn insufficient(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Insufficient {
            stage: stage.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 validation, 2 data insufficiency, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Insufficient { .. } => 2,
            Error::Numerical(_) => 3,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
