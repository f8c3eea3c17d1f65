//! Command-line front end: CSV ingestion, configuration and orchestration
//! of the `countflow-core` routines.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod report;

pub use commands::{run_command, Summary};
pub use config::{CommandKind, Environment, RunConfig, Settings};
pub use csvio::read_counts_csv;
pub use report::FitReport;
