//! Experiment front end for the `ctca` simulator: config files, seeded
//! replications, CSV and SVG output.

pub mod commands;
pub mod config;
pub mod plot;

use thiserror::Error;

pub use config::ExperimentSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("generation failure: {0}")]
    Generation(String),
    #[error("property violation: {0}")]
    Violation(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Generation(_) => 3,
            CliError::Violation(_) => 4,
            CliError::Simulation(_) | CliError::Io(_) => 1,
        }
    }
}
