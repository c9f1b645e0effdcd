//! Command-line front end: run configuration, checkpoints and the
//! train / eval / sr / ablate / inspect commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::{RunConfig, TrainSettings};
pub use error::{CliError, Result};
