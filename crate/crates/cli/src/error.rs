use std::path::PathBuf;

use thiserror::Error;

use qvi_core::QviError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Core(#[from] QviError),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("solver did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("tolerance exceeded: {0}")]
    Tolerance(String),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Parse(_) => 2,
            CliError::NotConverged { .. } => 3,
            CliError::Tolerance(_) => 4,
            CliError::Domain(_) | CliError::Core(_) | CliError::Write { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
