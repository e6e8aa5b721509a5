use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the model, the simulator and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a model primitive.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a documented constraint.
    #[error("invalid value for `{field}`: {reason}")]
    Constraint { field: String, reason: String },

    /// The configuration file names a key that does not exist.
    #[error("unknown configuration key: {0}")]
    UnknownKey(String),

    #[error("configuration file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed configuration: {0}")]
    Parse(String),

    /// An aggregation needed data that was not present (e.g. one arm missing).
    #[error("missing data: {0}")]
    MissingData(String),

    /// A simulation-level accounting or determinism check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn constraint(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Constraint {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
