//! Command-line front end: configuration, artifact files and experiment
//! drivers shared by the `cpcode` binary and its tests.

pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod experiments;

pub use commands::{execute, Cli};
pub use error::CliError;
