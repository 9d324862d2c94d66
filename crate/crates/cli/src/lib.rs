//! Configuration, run orchestration and CSV output for the `kwc` binary.

pub mod commands;
pub mod config;
pub mod expr;
pub mod series;
pub mod verify;

pub use commands::{exit, CommandError, RunStatus, RunSummary};
pub use config::{ConfigError, RunConfig};
