//! End-to-end checks of the command-line surfaces: bundled smoke configs,
//! dataset generation determinism, CSV ingestion, plot emission and exit
//! codes.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use groupprune::groups::GroupPartition;
use groupprune::objectives::{MultinomialLogisticObjective, SmoothFn};
use groupprune_cli::config::{ExperimentConfig, SynthSpec};
use groupprune_cli::data::{read_dense_csv, split_labels};
use groupprune_cli::{plots, runner, synthcmd};

fn tmp(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("groupprune-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn bundled_smoke_configs_run_quickly() {
    let started = std::time::Instant::now();
    for name in [
        "equivalence_smoke.json",
        "unique_min_smoke.json",
        "ompr_recovery_smoke.json",
        "pruning_compare_smoke.json",
        "schedule_ablation_smoke.json",
    ] {
        let t0 = std::time::Instant::now();
        let mut config = runner::load_config(&repo_config(name)).expect("bundled config parses");
        let dir = tmp(&format!("smoke-{name}"));
        match &mut config {
            ExperimentConfig::Equivalence(c) => c.output_dir = Some(dir.display().to_string()),
            ExperimentConfig::UniqueMin(c) => c.output_dir = Some(dir.display().to_string()),
            ExperimentConfig::OmprRecovery(c) => c.output_dir = Some(dir.display().to_string()),
            ExperimentConfig::PruningCompare(c) => c.output_dir = Some(dir.display().to_string()),
            ExperimentConfig::ScheduleAblation(c) => c.output_dir = Some(dir.display().to_string()),
        }
        let out = runner::run_and_persist(&config).expect("smoke config runs");
        assert!(out.join("results.json").exists());
        assert!(out.join("summary.txt").exists());
        assert!(out.join("schema.json").exists());
        let took = t0.elapsed().as_secs_f64();
        assert!(took < 60.0, "{name} took {took:.1}s, budget is 60s");
        std::fs::remove_dir_all(&dir).ok();
    }
    println!(
        "all bundled smoke configs ran in {:.1}s total",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn synthetic_datasets_are_byte_identical_across_runs() {
    let dir_a = tmp("synth-a");
    let dir_b = tmp("synth-b");
    for dir in [&dir_a, &dir_b] {
        let spec = SynthSpec::PlantedBlockTeacherClassification {
            seed: 7,
            num_features: 16,
            hidden_width: 16,
            num_classes: 4,
            block_size: 4,
            planted_blocks: 5,
            num_train: 128,
            num_eval: 32,
            label_margin: 0.3,
            output_dir: Some(dir.display().to_string()),
        };
        synthcmd::generate(&spec).unwrap();
    }
    for name in ["train.csv", "eval.csv", "ground_truth.json"] {
        let a = std::fs::read(dir_a.join("synth_teacher").join(name)).unwrap();
        let b = std::fs::read(dir_b.join("synth_teacher").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical-seed runs");
    }
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn generated_csv_feeds_the_objectives() {
    // dataset ingestion: dense numeric CSV with a header row, labels column
    // named by config
    let dir = tmp("ingest");
    let spec = SynthSpec::PlantedBlockTeacherClassification {
        seed: 9,
        num_features: 8,
        hidden_width: 8,
        num_classes: 3,
        block_size: 2,
        planted_blocks: 4,
        num_train: 96,
        num_eval: 24,
        label_margin: 0.0,
        output_dir: Some(dir.display().to_string()),
    };
    let out = synthcmd::generate(&spec).unwrap();
    let (header, table) = read_dense_csv(&out.join("train.csv")).unwrap();
    let (x, labels) = split_labels(&header, &table, "label").unwrap();
    assert_eq!(x.dim(), (96, 8));
    let p = Arc::new(GroupPartition::single(8 * 3).unwrap());
    let obj = MultinomialLogisticObjective::new(x, labels, 3, p, 0.01).unwrap();
    let at_zero = obj.value(&[0.0; 24]).unwrap();
    assert!((at_zero - 3f64.ln()).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn plots_error_without_results_and_emit_after_a_run() {
    let empty = tmp("plots-empty");
    assert!(plots::export_plots(&empty).is_err());
    assert!(!empty.join("plots").exists(), "no files on error");
    std::fs::remove_dir_all(&empty).ok();
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let bin = env!("CARGO_BIN_EXE_groupprune");
    // invalid config -> exit 2 with a diagnostic
    let dir = tmp("exitcodes");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"experiment": "equivalence", "seeds": []}"#).unwrap();
    let out = Command::new(bin).args(["run"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "invalid config should exit 2");
    assert!(!out.stderr.is_empty());

    // missing results dir for plots -> config-stage error, exit 2
    let out = Command::new(bin)
        .args(["plots"])
        .arg(dir.join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // defaults prints at least one parseable config
    let out = Command::new(bin).args(["defaults"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"experiment\""));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_subcommand_writes_report_and_trace() {
    let dir = tmp("oraclecmd");
    let cfg: groupprune_cli::config::OracleConfig = serde_json::from_str(&format!(
        r#"{{"seed": 3, "num_features": 12, "num_groups": 6, "planted": 2, "output_dir": "{}"}}"#,
        dir.display()
    ))
    .unwrap();
    let out = groupprune_cli::oraclecmd::run(&cfg).unwrap();
    assert!(out.join("oracle.json").exists());
    let trace = std::fs::read_to_string(out.join("group_lasso_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective,grad_norm"));
    assert!(trace.lines().count() > 2);
    std::fs::remove_dir_all(&dir).ok();
}
