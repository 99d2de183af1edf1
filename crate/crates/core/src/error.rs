use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: reference to undeclared species `{name}`")]
    UndeclaredSpecies {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("line {line}: species `{name}` already has a rule")]
    DuplicateTarget { line: usize, name: String },
    #[error("network declares no species")]
    NoSpecies,
    #[error("rule index {index} out of range for {count} species")]
    InvalidRule { index: usize, count: usize },
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("rule depends on {deps} species, bound is {bound}")]
    TooManyDependencies { deps: usize, bound: usize },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid partitioning: {0}")]
    InvalidPartitioning(String),
    #[error("need at least 2 nodes to bipartition, got {0}")]
    TooFewNodes(usize),
    #[error("{what} has {size} elements, guard is {limit}")]
    GuardExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("empty pool")]
    EmptyPool,
    #[error("infeasible tree shape: {0}")]
    InfeasibleShape(String),
    #[error("{d} species exceed the dense solver cap of {cap}")]
    CapacityExceeded { d: usize, cap: usize },
    #[error("time step {dt} is invalid (must satisfy 0 < dt <= {max})")]
    InvalidTimeStep { dt: f64, max: f64 },
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid tolerance {0}, expected a value in (0, 1)")]
    InvalidTolerance(f64),
    #[error("invalid rank {0}")]
    InvalidRank(usize),
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
