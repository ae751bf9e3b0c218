//! Command-line harness: configuration and the subcommands.

pub mod commands;
pub mod config;

pub use commands::{cmd_benchmark, cmd_generate, cmd_selftest, cmd_sweep, cmd_train, with_threads};
pub use config::{ExperimentConfig, PolicyKind};
