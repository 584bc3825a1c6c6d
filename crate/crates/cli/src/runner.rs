//! Experiment execution and artifact persistence.
//!
//! A run writes, under `<output root>/<experiment kind>/`:
//! - `results.json` — deterministic structured metrics (config hash, config
//!   echo, per-seed rows, summary); byte-identical across reruns of the same
//!   config and seeds;
//! - `run_info.json` — wall time and timestamp (the nondeterministic part);
//! - `summary.txt` — the human-readable table;
//! - `schema.json` — column documentation for the emitted CSVs;
//! - `seed_<s>/<name>.csv` — one CSV per trace.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::config::{config_hash, ExperimentConfig};
use crate::experiments::{self, ExperimentOutput};
use crate::CliError;

/// Environment variable overriding the output root.
pub const OUTPUT_ROOT_ENV: &str = "GROUPPRUNE_OUT";

/// Resolve the output directory: config override, then the environment
/// variable, then `./groupprune-out`.
pub fn resolve_output_root(config_dir: Option<&str>) -> PathBuf {
    if let Some(dir) = config_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var(OUTPUT_ROOT_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("groupprune-out")
}

/// Execute the experiment described by a parsed config.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    match config {
        ExperimentConfig::Equivalence(c) => experiments::equivalence::run(c),
        ExperimentConfig::UniqueMin(c) => experiments::unique_min::run(c),
        ExperimentConfig::OmprRecovery(c) => experiments::ompr_recovery::run(c),
        ExperimentConfig::PruningCompare(c) => experiments::pruning::run_compare(c),
        ExperimentConfig::ScheduleAblation(c) => experiments::pruning::run_ablation(c),
    }
}

/// CSV column documentation emitted next to the artifacts.
fn schema_json() -> serde_json::Value {
    json!({
        "metrics_*.csv": {
            "step": "training step index",
            "phase": "phase kind at the step (dense/sparsification/sparse/finetune)",
            "loss": "training batch loss",
            "eval_loss": "eval-set loss (recomputed every eval_every steps)",
            "eval_accuracy": "eval-set accuracy",
            "active_groups": "total active blocks across pruned layers"
        },
        "ompr_history_*.csv": {
            "round": "accepted swap number",
            "swap_in": "group entering the support",
            "swap_out": "group leaving the support",
            "objective": "restricted-fit loss after the swap"
        },
        "equivalence_gaps.csv": {
            "seed": "config seed", "instance": "instance index",
            "mask_kind": "softmax | l1 | powerprop",
            "masked_optimum": "best-found masked objective",
            "regularized_optimum": "best-found regularized objective",
            "rel_gap": "relative gap between the two optima",
            "oracle_verified": "probe verification of the regularized minimizer"
        },
        "group_lasso_trace.csv": {
            "iteration": "proximal-gradient iteration",
            "objective": "composite objective value",
            "grad_norm": "prox fixed-point residual at the iteration"
        },
        "unique_min_instances.csv": {
            "seed": "config seed", "instance": "instance index",
            "lambda_fraction": "lambda as a fraction of the activation threshold",
            "group_lasso_sparsity": "group sparsity of the group LASSO solution",
            "max_l2_distance": "worst distance of a q-kind minimizer from it",
            "pass": "all kinds matched and probes confirmed"
        }
    })
}

/// Run a config end to end and persist everything. Returns the artifact
/// directory.
pub fn run_and_persist(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    config.validate().map_err(CliError::Config)?;
    let root = resolve_output_root(config.output_dir());
    let dir = root.join(config.kind_name());
    fs::create_dir_all(&dir)?;
    let started = Instant::now();
    let output = match execute(config) {
        Ok(o) => o,
        Err(e) => {
            // flag partial artifacts so a failed run is never mistaken for a
            // finished one
            let _ = fs::write(dir.join("FAILED"), format!("run failed: {e}\n"));
            return Err(e);
        }
    };
    let wall = started.elapsed().as_secs_f64();

    let results = json!({
        "experiment": config.kind_name(),
        "config_hash": config_hash(config),
        "library_version": env!("CARGO_PKG_VERSION"),
        "seeds": config.seeds(),
        "config": config,
        "results": output.results,
    });
    fs::write(
        dir.join("results.json"),
        serde_json::to_string_pretty(&results).expect("results serialize") + "\n",
    )?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    fs::write(
        dir.join("run_info.json"),
        serde_json::to_string_pretty(&json!({
            "wall_time_secs": wall,
            "timestamp_unix": timestamp,
        }))
        .expect("info serializes")
            + "\n",
    )?;
    fs::write(dir.join("summary.txt"), &output.summary_text)?;
    fs::write(
        dir.join("schema.json"),
        serde_json::to_string_pretty(&schema_json()).expect("schema serializes") + "\n",
    )?;
    for trace in &output.traces {
        let seed_dir = dir.join(format!("seed_{}", trace.seed));
        fs::create_dir_all(&seed_dir)?;
        let header: Vec<&str> = trace.header.iter().map(|s| s.as_str()).collect();
        crate::data::write_csv(
            &seed_dir.join(format!("{}.csv", trace.name)),
            &header,
            &trace.rows,
        )?;
    }
    let failed = dir.join("FAILED");
    if failed.exists() {
        let _ = fs::remove_file(failed);
    }
    Ok(dir)
}

/// Load a config file, reporting config-stage errors distinctly.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}
