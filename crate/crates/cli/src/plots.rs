//! The `plots` subcommand: gnuplot-ready .dat files from a results
//! directory.
//!
//! Emitted files:
//! - `sparsity_ramp.dat` — the exponential ramp `t -> sparsity(t)` per
//!   configured exponent;
//! - `schedule_curves.dat` — run-level sparsity over step fraction for the
//!   abrupt alternating layout (a step function) and the ramped layout
//!   (smooth exponential transitions);
//! - `loss_vs_step_<name>.dat` — loss traces from every metrics CSV found;
//! - `loss_vs_sparsity.dat` — median eval loss per sparsity and algorithm
//!   (when the directory holds a pruning comparison).

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use groupprune::seqattn::{sparsity_at, PhaseKind, PhaseSchedule};

use crate::data::fmt_f64;
use crate::experiments::to_runtime;
use crate::CliError;

/// The run-level sparsity curve of a schedule: 0 in dense phases, the ramp
/// value in sparsification phases, the target in frozen phases.
fn schedule_curve(schedule: &PhaseSchedule, points: usize) -> Vec<(f64, f64)> {
    let total = schedule.total_steps;
    (0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            let step = ((frac * total as f64) as usize).min(total - 1);
            let span = schedule.span_at(step);
            let s = match span.kind {
                PhaseKind::Dense => 0.0,
                PhaseKind::Sparse | PhaseKind::Finetune => schedule.target_sparsity,
                PhaseKind::Sparsification => sparsity_at(
                    schedule.phase_progress(step),
                    schedule.target_sparsity,
                    schedule.sparsify_exponent,
                )
                .unwrap_or(schedule.target_sparsity),
            };
            (frac, s)
        })
        .collect()
}

fn find_metrics_csvs(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let Ok(entries) = fs::read_dir(dir) else {
        return found;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            found.extend(find_metrics_csvs(&path));
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("metrics_") && n.ends_with(".csv"))
        {
            found.push(path);
        }
    }
    found.sort();
    found
}

/// Emit every plot-data file derivable from `results_dir`. Errors when the
/// directory holds no results (nothing is written in that case).
pub fn export_plots(results_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let results_path = results_dir.join("results.json");
    if !results_path.exists() {
        return Err(CliError::Config(format!(
            "{}: no results.json; run an experiment first",
            results_dir.display()
        )));
    }
    let results: Value = serde_json::from_str(&fs::read_to_string(&results_path)?)
        .map_err(|e| CliError::Config(format!("results.json: {e}")))?;
    let plots_dir = results_dir.join("plots");
    fs::create_dir_all(&plots_dir)?;
    let mut written = Vec::new();

    // ramp and schedule-shape curves from the run's configuration (defaults
    // when the experiment carries no schedule)
    let cfg = &results["config"];
    let sparsity = cfg["sparsities"][0].as_f64().unwrap_or(0.9);
    let steps = cfg["steps"].as_u64().unwrap_or(1000) as usize;
    let cycles = cfg["cycles"].as_u64().unwrap_or(3) as usize;
    let mut exponents: Vec<f64> = cfg["exponents"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
        .unwrap_or_default();
    if exponents.is_empty() {
        exponents.push(cfg["sparsify_exponent"].as_f64().unwrap_or(4.0));
    }

    {
        let mut out = String::from("# t");
        for c in &exponents {
            out.push_str(&format!(" sparsity_c{c}"));
        }
        out.push('\n');
        let points = 201;
        for i in 0..points {
            let t = i as f64 / (points - 1) as f64;
            out.push_str(&fmt_f64(t));
            for &c in &exponents {
                let v = sparsity_at(t, sparsity, c).map_err(to_runtime)?;
                out.push(' ');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
        let path = plots_dir.join("sparsity_ramp.dat");
        fs::write(&path, out)?;
        written.push(path);
    }

    {
        let abrupt = PhaseSchedule::acdc(steps, sparsity, 0.1, cycles, 0.15).map_err(to_runtime)?;
        let ramped = PhaseSchedule::seqattnpp(steps, sparsity, exponents[0], 0.1, cycles, 0.15)
            .map_err(to_runtime)?;
        let a = schedule_curve(&abrupt, 400);
        let b = schedule_curve(&ramped, 400);
        let mut out = String::from("# step_fraction acdc_sparsity seqattnpp_sparsity\n");
        for ((t, sa), (_, sb)) in a.iter().zip(&b) {
            out.push_str(&format!(
                "{} {} {}\n",
                fmt_f64(*t),
                fmt_f64(*sa),
                fmt_f64(*sb)
            ));
        }
        let path = plots_dir.join("schedule_curves.dat");
        fs::write(&path, out)?;
        written.push(path);
    }

    for csv in find_metrics_csvs(results_dir) {
        let (header, table) = crate::data::read_csv_strings(&csv)?;
        let step_i = header.iter().position(|h| h == "step");
        let loss_i = header.iter().position(|h| h == "loss");
        let eval_i = header.iter().position(|h| h == "eval_loss");
        let (Some(si), Some(li), Some(ei)) = (step_i, loss_i, eval_i) else {
            continue;
        };
        let stem = csv
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("metrics");
        let mut out = String::from("# step loss eval_loss\n");
        for row in &table {
            out.push_str(&format!("{} {} {}\n", row[si], row[li], row[ei]));
        }
        let path = plots_dir.join(format!("loss_vs_step_{stem}.dat"));
        fs::write(&path, out)?;
        written.push(path);
    }

    if let Some(grid) = results["results"]["grid"].as_array() {
        let mut out = String::from("# sparsity block_size algo median_eval_loss\n");
        for cell in grid {
            out.push_str(&format!(
                "{} {} {} {}\n",
                cell["sparsity"],
                cell["block_size"],
                cell["algo"].as_str().unwrap_or("?"),
                cell["median_eval_loss"]
            ));
        }
        let path = plots_dir.join("loss_vs_sparsity.dat");
        fs::write(&path, out)?;
        written.push(path);
    }

    Ok(written)
}
