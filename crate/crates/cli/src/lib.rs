//! Experiment runner library behind the `groupprune` binary: config-driven
//! execution of the equivalence, unique-minimum, support-recovery, pruning
//! comparison and ramp-ablation studies, plus dataset generation and
//! plot-data export.

use std::fmt;

pub mod config;
pub mod data;
pub mod experiments;
pub mod oraclecmd;
pub mod plots;
pub mod runner;
pub mod synthcmd;

/// CLI-facing error split into config-stage and runtime-stage failures so
/// the binary can exit with the right code (2 vs 1).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid config: {msg}"),
            CliError::Runtime(msg) => write!(f, "run failed: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// Process exit code: 2 for config errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
