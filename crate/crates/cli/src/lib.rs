//! Command-line front end: configuration, commands and report writing.

pub mod commands;
pub mod config;
pub mod report;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 2,
            CliError::Usage(_) | CliError::Io { .. } => 1,
        }
    }
}
