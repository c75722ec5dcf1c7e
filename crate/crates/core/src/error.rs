use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, solver and scenario layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent shapes or indices between related structures.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("empty input: {0}")]
    Empty(String),

    /// No alternative lies strictly inside the perceived-time bounds.
    #[error("empty support: no route time strictly inside ({lower}, {upper})")]
    EmptySupport { lower: f64, upper: f64 },

    #[error("no route from node {origin} to node {destination}")]
    Disconnected { origin: u32, destination: u32 },

    #[error("root finder did not converge after {iterations} iterations (bracket [{lo}, {hi}], residual {residual:e})")]
    RootNotConverged {
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error("invalid scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn scenario(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
