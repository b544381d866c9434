use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax error in an input document.
    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Structurally valid input that breaks an invariant. `field` names the
    /// offending location, e.g. `objects[0].masks[3]`.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// A correlation was requested over a constant sequence.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn from_json(source_name: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Short machine-readable kind used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Evaluation(_) => "evaluation",
            Error::Degenerate(_) => "degenerate",
            Error::Training(_) => "training",
            Error::Sampling(_) => "sampling",
            Error::Io { .. } => "io",
        }
    }
}
