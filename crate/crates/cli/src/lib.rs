//! Experiment driver behind the `credit` binary.
//!
//! Every command reads one JSON [`config::ExperimentConfig`], prepares (or reuses)
//! the cached splits and preprocessing plans, and writes CSV tables plus a JSON
//! [`report::RunReport`] under the output directory.

pub mod benchmark;
pub mod config;
pub mod explain;
pub mod fairness;
pub mod prep;
pub mod reject;
pub mod report;
mod train;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration; nothing was computed.
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(credit_core::Error),

    #[error(transparent)]
    Core(credit_core::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration errors, 3 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<credit_core::Error> for CliError {
    fn from(e: credit_core::Error) -> Self {
        use credit_core::Error as E;
        match e {
            E::MissingData { .. } | E::Parse { .. } | E::Schema(_) => CliError::Data(e),
            E::Profile { .. } => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
