use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular system: pivot {pivot:.3e} at column {column} is below tolerance {tolerance:.3e}")]
    SingularSystem {
        column: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("model includes {size} covariates but at most {max} are allowed")]
    MaskTooLarge { size: usize, max: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("{path}: parse error at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 2 for configuration or
    /// input-schema problems, 3 for I/O, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::InvalidModel(_)
            | Error::MaskTooLarge { .. }
            | Error::TooLarge(_)
            | Error::DimensionMismatch(_) => 2,
            Error::Io { .. } | Error::Serialization(_) => 3,
            Error::SingularSystem { .. } | Error::NonFinite(_) | Error::DegenerateInput(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
