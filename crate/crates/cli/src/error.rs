//! CLI error taxonomy: every failure is mapped to one machine-readable
//! category with a fixed process exit code, printed to stderr as
//! `error[category]: message`.

use std::path::Path;

use thiserror::Error;

/// Categorized CLI failure. The category (and therefore the exit code)
/// is part of the command-line contract, so scripts can branch on it.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable configuration: missing file, bad TOML, invalid values.
    #[error("{0}")]
    Config(String),

    /// Malformed input data (IDX headers, CSV rows, dump files).
    #[error("{0}")]
    Format(String),

    /// Filesystem failure, tagged with the path involved.
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    /// A numerical routine rejected its input or broke an invariant.
    #[error("{0}")]
    Compute(String),

    /// Optimization diverged; partial outputs may have been written.
    #[error("{0}")]
    Training(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Format(_) => "format",
            CliError::Io { .. } => "io",
            CliError::Compute(_) => "compute",
            CliError::Training(_) => "training",
        }
    }

    /// Process exit code; 0 is reserved for a fully completed run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Format(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Compute(_) => 5,
            CliError::Training(_) => 6,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: source.to_string(),
        }
    }
}

impl From<infoplane_core::Error> for CliError {
    fn from(err: infoplane_core::Error) -> Self {
        match err {
            infoplane_core::Error::Training { .. } => CliError::Training(err.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
