//! Command-line front end: configuration loading, experiment orchestration
//! and CSV/report output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, Result};
