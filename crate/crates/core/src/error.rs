//! Crate-wide error type.

use std::fmt;

/// Errors produced by partition construction, evaluation and solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A group partition violated disjointness/coverage constraints.
    InvalidPartition(String),
    /// Vector or matrix shapes do not agree.
    DimensionMismatch { expected: usize, got: usize },
    /// A scalar argument was outside its domain.
    InvalidArgument(String),
    /// `k` exceeds the number of groups.
    KExceedsGroupCount { k: usize, t: usize },
    /// A group index was outside `[0, t)`.
    GroupIndexOutOfRange { index: usize, t: usize },
    /// A solver produced a non-finite objective.
    Diverged { iteration: usize, detail: String },
    /// Exhaustive enumeration would exceed the configured budget.
    EnumerationBudget { required: u128, budget: u128 },
    /// Training aborted (e.g. NaN loss); carries a short diagnostic.
    TrainingAborted(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidPartition(msg) => write!(f, "invalid partition: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::KExceedsGroupCount { k, t } => {
                write!(f, "k exceeds group count: k={k}, t={t}")
            }
            Error::GroupIndexOutOfRange { index, t } => {
                write!(f, "group index {index} out of range for {t} groups")
            }
            Error::Diverged { iteration, detail } => {
                write!(f, "solver diverged at iteration {iteration}: {detail}")
            }
            Error::EnumerationBudget { required, budget } => {
                write!(
                    f,
                    "support enumeration needs {required} solves, budget is {budget}"
                )
            }
            Error::TrainingAborted(msg) => write!(f, "training aborted: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
