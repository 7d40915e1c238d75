//! Command-line driver for `fastconv`: accuracy tables, complexity tables,
//! layer-suite timing and algorithm generation.
//!
//! The binary is `fastconv`; [`cli::run`] is its whole body so tests can call
//! it in-process.

pub mod accuracy;
pub mod algo;
pub mod cli;
pub mod gen;
pub mod report;
pub mod suite;
pub mod tables;
pub mod timing;

/// Exit code for bad arguments or unreadable inputs.
pub const EXIT_USAGE: i32 = 1;
/// Exit code when a self-check fails.
pub const EXIT_VERIFICATION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Verification(String),
    #[error(transparent)]
    Conv(#[from] fastconv::ConvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("suite file: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Verification(_) => EXIT_VERIFICATION,
            _ => EXIT_USAGE,
        }
    }
}
