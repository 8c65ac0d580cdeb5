//! Command-line front end for the `mollify` optimizer.

pub mod commands;
pub mod config;
pub mod oracle_check;
pub mod output;

pub use commands::CliError;
pub use config::{ExperimentConfig, ObjectiveSource};
