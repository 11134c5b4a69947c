//! Configuration, experiment orchestration and file emission for fblab.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
