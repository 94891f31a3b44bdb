//! Error type shared across the crate.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or insufficient input data.
    #[error("data error: {0}")]
    Data(String),

    /// Parse failure in an input file, with 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Entity/relation/bucket id outside the table it indexes.
    #[error("id out of range: {0}")]
    IdOutOfRange(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Non-finite loss or gradient; training cannot continue.
    #[error("numerical divergence: {0}")]
    Divergence(String),

    /// Events fed to a stream-order structure went backwards in time.
    #[error("time regression: {0}")]
    TimeRegression(String),

    /// Checkpoint or report file is not in the expected format.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

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
    /// Attach a path to an io error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Divergence(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
