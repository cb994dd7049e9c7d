//! Experiment runner behind the `dcdgd` binary.
//!
//! Each subcommand reads a config file (see [`config`]) and writes
//! plot-ready CSV files. The command functions are public so tests can
//! drive them without spawning a process.

pub mod analyze;
pub mod compare;
pub mod config;
mod csv;
pub mod setup;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// Bad input files: matrices, datasets.
    #[error("{0}")]
    Input(String),
    #[error("divergence detected where convergence was required: {0}")]
    Diverged(String),
    #[error(transparent)]
    Engine(#[from] dcdgd::EngineError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for config and input errors, 3 for unexpected divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Engine(dcdgd::EngineError::SnrInfeasible { .. } | dcdgd::EngineError::Config(_)) => 2,
            CliError::Engine(_) | CliError::Io(_) => 1,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub trials: Option<usize>,
    pub iterations: Option<usize>,
}
