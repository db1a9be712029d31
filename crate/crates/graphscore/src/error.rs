//! Error types shared across the crate.

use thiserror::Error;

/// Errors surfaced by library operations.
///
/// The variants map onto the process exit codes used by the command-line
/// front end: configuration errors exit with 2, data errors with 3 and
/// numerical failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (bad distribution setup, size
    /// guards on oracles, malformed config files).
    #[error("configuration error: {0}")]
    Config(String),

    /// Missing or malformed data (dataset files, scores files).
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values or failed numerical procedures.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
