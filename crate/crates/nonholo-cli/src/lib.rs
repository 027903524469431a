//! Scenario-driven front end for the nonholonomic tracking toolkit:
//! JSON scenario files, admissibility/maneuverability checks, feedforward
//! planning, closed-loop simulation, and CSV/SVG artifact emission.

pub mod commands;
pub mod csvio;
pub mod scenario;
pub mod svg;

use thiserror::Error;

/// Environment variable overriding every output directory/location.
pub const OUT_DIR_ENV: &str = "NONHOLO_OUT_DIR";

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
/// A verdict failed or the simulation faulted.
pub const EXIT_FAIL: u8 = 1;
/// The input could not be read or parsed.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{0}")]
    Verdict(String),
    #[error("{0}")]
    Core(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Schema(_) => EXIT_USAGE,
            CliError::Verdict(_) | CliError::Core(_) => EXIT_FAIL,
        }
    }
}
