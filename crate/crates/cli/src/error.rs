use std::path::PathBuf;

use thiserror::Error;

use crate::checkpoint::CheckpointError;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(oasr_core::Error),
}

impl From<oasr_core::Error> for CliError {
    fn from(e: oasr_core::Error) -> Self {
        match e {
            oasr_core::Error::NonFinite(what) => CliError::Numerical(format!("non-finite value in {what}")),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use oasr_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Checkpoint(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Core(E::Io { .. } | E::Image(_) | E::Dataset(_)) => EXIT_IO,
            CliError::Core(E::NonFinite(_)) => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
