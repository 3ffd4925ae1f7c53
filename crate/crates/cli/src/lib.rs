//! Command-line front-end for `qvlab`.

pub mod args;
pub mod config;
pub mod run;

pub use args::Cli;
pub use config::{ConfigError, Format, ModelSpec, NList, RunConfig, Subcommand};
pub use run::{execute, run, Outcome, RunError, EXIT_CHECK_FAILED, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
