//! Error type for the CLI layer, carrying the process exit code policy:
//! 0 = success, 1 = invalid input or I/O, 2 = a computation that failed its
//! quality contract (non-convergence, too many excluded replications).

use std::fmt;

use assort_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    /// A Monte Carlo cell lost more than the tolerated fraction of its
    /// replications.
    ExcessExclusions {
        cell: String,
        excluded: usize,
        reps: usize,
    },
    Io(std::io::Error),
    Json(serde_json::Error),
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::NotConverged { .. }) => 2,
            CliError::ExcessExclusions { .. } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ExcessExclusions { cell, excluded, reps } => write!(
                f,
                "cell {cell}: {excluded} of {reps} replications were excluded, \
                 more than the tolerated 5%"
            ),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Json(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}
