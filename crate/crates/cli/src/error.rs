use bnpart_core::Error;
use thiserror::Error as ThisError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(e) if !e.use_stderr() => EXIT_OK,
            CliError::Args(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    /// Wraps a library error with a location prefix such as a file path.
    pub fn from_core(context: &str, e: Error) -> Self {
        let message = if context.is_empty() {
            e.to_string()
        } else {
            format!("{context}: {e}")
        };
        match e {
            Error::Syntax { .. }
            | Error::UndeclaredSpecies { .. }
            | Error::DuplicateTarget { .. }
            | Error::NoSpecies
            | Error::InvalidRule { .. }
            | Error::UnknownSpecies(_)
            | Error::TooManyDependencies { .. }
            | Error::InvalidAssignment(_)
            | Error::InvalidPartitioning(_)
            | Error::DimensionMismatch { .. }
            | Error::MalformedTrajectory(_)
            | Error::Io(_) => CliError::Input(message),
            Error::TooFewNodes(_)
            | Error::InfeasibleShape(_)
            | Error::EmptyPool
            | Error::InvalidTime(_)
            | Error::InvalidTolerance(_)
            | Error::InvalidRank(_)
            | Error::InvalidArgument(_) => CliError::Usage(message),
            Error::GuardExceeded { .. } | Error::CapacityExceeded { .. } | Error::InvalidTimeStep { .. } => {
                CliError::Numerical(message)
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_core("", e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
