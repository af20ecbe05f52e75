//! Configuration parsing, scenario dispatch and file emission for the
//! `pondero` command line runner.
//!
//! The binary in `main.rs` is a thin shell around this library: it maps
//! [`CliError`] variants to process exit codes (`2` for configuration
//! errors, `3` for runtime failures) and leaves everything else — schema
//! validation, unit conversion, running the simulation and writing the
//! output files — to the modules below.

pub mod config;
pub mod examples;
pub mod grid_io;
pub mod manifest;
pub mod runner;

use std::fmt;

/// Failure classes of a CLI invocation, split by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// The configuration file is missing, malformed, or describes an
    /// invalid scenario. Exit code 2.
    Config(String),
    /// The scenario was accepted but the run failed: a numerical routine
    /// gave up or an output file could not be written. Exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
