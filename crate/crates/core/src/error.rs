use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A row of an input file could not be parsed.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// Input parsed but violates a structural requirement.
    #[error("validation error: {0}")]
    Validation(String),

    /// The caller broke a precondition (unsorted input, unnormalized map, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Cross-validation could not be set up.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error on {}: {source}", path.display())]
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

impl Error {
    /// Short stable tag for machine-readable error prefixes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Contract(_) => "contract",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Protocol(_) => "protocol",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
