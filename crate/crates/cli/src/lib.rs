//! Library half of the `symloc` binary: run configuration, the
//! deterministic experiment loops (Monte-Carlo efficiency study,
//! truncated-information curves, fit diagnostics, one-shot estimation),
//! and the CSV/SVG rendering they report through.
//!
//! Everything here is seeded and order-independent: a cell's sample stream
//! depends only on the master seed, the density tag, the sample size, and
//! the replication index, never on the order the configuration lists them.

use std::fmt;

pub mod config;
pub mod report;
pub mod runner;
pub mod svg;

/// Failures surfaced to the command line, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Flags, config-file entries, or option values that cannot be used
    /// (exit code 3).
    Config(String),
    /// Input data files that cannot be estimated from (exit code 2).
    Data(String),
    /// I/O failures and internal estimation errors (exit code 1).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Data(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Data(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}
