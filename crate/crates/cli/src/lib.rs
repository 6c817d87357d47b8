//! Library side of the `enroll-opt` command-line tool: configuration
//! ingestion, command implementations, and the typed output reports.

pub mod commands;
pub mod config;

use enroll_core::Error;

use config::ConfigError;

/// Command failure, mapped to the documented process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Model(e) => match e {
                Error::Domain(_) | Error::InvalidPlan(_) | Error::Degenerate(_) => 2,
                Error::Unreachable { .. } => 3,
                Error::Infeasible(_) | Error::NoFeasibleMember(_) => 4,
                Error::DimensionCeiling { .. } => 5,
                Error::NotConverged { .. } => 1,
            },
        }
    }
}
