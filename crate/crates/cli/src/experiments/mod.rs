//! The five experiment runners and their result rows.

pub mod equivalence;
pub mod ompr_recovery;
pub mod pruning;
pub mod unique_min;

use serde_json::Value;

use crate::CliError;

/// A CSV trace produced by a run, written under its seed's subdirectory.
pub struct TraceFile {
    pub seed: u64,
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Everything an experiment hands back to the runner.
pub struct ExperimentOutput {
    /// Structured, deterministic result rows and summary.
    pub results: Value,
    pub traces: Vec<TraceFile>,
    /// Human-readable summary table.
    pub summary_text: String,
}

/// Median of a nonempty slice (average of the middle pair on even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn to_runtime(e: groupprune::Error) -> CliError {
    CliError::Runtime(e.to_string())
}
