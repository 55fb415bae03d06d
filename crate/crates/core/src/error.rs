use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A configuration value failed validation. `path` is the dotted field path.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },

    /// A CSV ingestion failure; `row` is the 1-based data row (header excluded).
    #[error("{file}: row {row}: {message}")]
    Ingestion { file: String, row: usize, message: String },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("illegal transition: event {event} in state {state}")]
    State { state: String, event: String },

    #[error("access denied: connector held by agent {holder}, plug-in attempted by agent {agent}")]
    Access { holder: u32, agent: u32 },

    #[error("station {0} has no free connector")]
    Unavailable(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("instance too large for exhaustive search: {0}")]
    Size(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible schedule: {message} (binding slots {slots:?})")]
    Infeasible { message: String, slots: Vec<usize> },

    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
