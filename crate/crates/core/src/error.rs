use alloc::string::String;

/// Errors raised by problem construction, encoding and the engines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no tasks")]
    NoTasks,
    #[error("task {task}: invalid bounds: {reason}")]
    InvalidBounds { task: usize, reason: String },
    #[error("coordinate {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite fitness on task {task}")]
    NonFiniteFitness { task: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate model: need at least 2 elite genomes, got {0}")]
    DegenerateModel(usize),
    #[error("dynamics blow-up")]
    DynamicsBlowUp,
    #[error("invalid benchmark: {0}")]
    InvalidBenchmark(String),
    #[error("mismatched search spaces: {0}")]
    MismatchedSpaces(String),
}

pub type Result<T> = core::result::Result<T, Error>;
