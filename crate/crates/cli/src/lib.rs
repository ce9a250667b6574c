//! File formats, configuration and commands of the `otpool` tool.

pub mod bench;
pub mod checks;
pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod dataset_file;
pub mod error;
pub mod manifest;
pub mod parallel;

pub use error::{CliError, Result};
