use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input data or configuration (exit code 2).
    Input,
    /// Schema or contract violation between components (exit code 3).
    Contract,
    /// Everything else (exit code 1).
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("pearson undefined: {0}")]
    PearsonUndefined(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Structure(_)
            | Error::Alignment(_)
            | Error::Consistency(_)
            | Error::Config(_)
            | Error::Policy(_)
            | Error::Io { .. } => ErrorCategory::Input,
            Error::Schema(_) | Error::Contract(_) => ErrorCategory::Contract,
            Error::PearsonUndefined(_) | Error::Json(_) => ErrorCategory::Internal,
        }
    }
}
