//! Desk-scale pruning comparison on the planted block-sparse teacher task,
//! plus the ramp-exponent ablation built on the same machinery.

use serde::Serialize;
use serde_json::json;

use groupprune::groups::GroupPartition;
use groupprune::rng;
use groupprune::seqattn::{
    train_network, LossKind, Network, NetworkSpec, PhaseSchedule, PruneAlgo, TrainConfig,
    TrainData, TrainOutcome,
};
use groupprune::synth::{planted_block_teacher, TeacherSpec};

use crate::config::{AlgoChoice, HeadMode, PruningCompareConfig, ScheduleAblationConfig};
use crate::experiments::{median, to_runtime, ExperimentOutput, TraceFile};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct PruningRow {
    pub seed: u64,
    pub algo: String,
    pub sparsity: f64,
    pub block_size: usize,
    pub final_eval_loss: f64,
    pub final_eval_accuracy: f64,
    /// Fraction of planted first-layer blocks retained (when the first layer
    /// is pruned).
    pub recovery: Option<f64>,
    pub active_groups: usize,
    /// Retained block indices per layer.
    pub final_masks: Vec<Vec<usize>>,
}

fn retained_target(groups: usize, sparsity: f64) -> usize {
    (((1.0 - sparsity) * groups as f64) - 1e-9).ceil().max(1.0) as usize
}

fn schedule_for(
    choice: AlgoChoice,
    steps: usize,
    sparsity: f64,
    exponent: f64,
    cycles: usize,
) -> Result<(PruneAlgo, PhaseSchedule), groupprune::Error> {
    Ok(match choice {
        AlgoChoice::SeqAttnPP => (
            PruneAlgo::SeqAttnPP,
            PhaseSchedule::seqattnpp(steps, sparsity, exponent, 0.2, cycles, 0.15)?,
        ),
        // the ablation keeps attention-guided selection but swaps the ramped
        // cycles for abrupt sparse/dense alternation
        AlgoChoice::SeqAttnPPNoSparsification => (
            PruneAlgo::SeqAttnPP,
            PhaseSchedule::acdc(steps, sparsity, 0.2, cycles, 0.15)?,
        ),
        AlgoChoice::Acdc => (
            PruneAlgo::Acdc,
            PhaseSchedule::acdc(steps, sparsity, 0.2, cycles, 0.15)?,
        ),
        AlgoChoice::Magnitude => (
            PruneAlgo::Magnitude,
            PhaseSchedule::dense_finetune(steps, sparsity, 0.15)?,
        ),
        AlgoChoice::PowerProp => (
            PruneAlgo::PowerProp,
            PhaseSchedule::dense_finetune(steps, sparsity, 0.15)?,
        ),
    })
}

/// Run one training row and score it against the planted blocks.
pub fn run_one(
    cfg: &PruningCompareConfig,
    choice: AlgoChoice,
    sparsity: f64,
    block_size: usize,
    exponent: f64,
    seed: u64,
) -> Result<(PruningRow, TrainOutcome), CliError> {
    let layer0_groups = GroupPartition::blocks(cfg.num_features, cfg.hidden_width, block_size)
        .map_err(to_runtime)?
        .num_groups();
    let planted = cfg
        .planted_blocks
        .unwrap_or_else(|| retained_target(layer0_groups, sparsity));
    let data = planted_block_teacher(&TeacherSpec {
        num_features: cfg.num_features,
        hidden_width: cfg.hidden_width,
        num_classes: cfg.num_classes,
        block_size,
        planted_blocks: planted,
        num_train: cfg.num_train,
        num_eval: cfg.num_eval,
        seed: rng::derive(seed, 0xda7a),
        label_margin: cfg.label_margin,
    })
    .map_err(to_runtime)?;
    let spec = NetworkSpec {
        widths: vec![cfg.num_features, cfg.hidden_width, cfg.num_classes],
        block_size,
        loss: LossKind::SoftmaxCrossEntropy,
        min_groups_to_prune: cfg.train.min_groups_to_prune,
    };
    let (algo, schedule) =
        schedule_for(choice, cfg.steps, sparsity, exponent, cfg.cycles).map_err(to_runtime)?;
    let lr_scale = if algo == PruneAlgo::PowerProp {
        cfg.powerprop_lr_scale
    } else {
        1.0
    };
    let tcfg = TrainConfig {
        batch_size: cfg.train.batch_size,
        lr0: cfg.train.lr0 * lr_scale,
        lr1: cfg.train.lr1.map(|v| v * lr_scale),
        optimizer: cfg.train.optimizer,
        weight_decay: cfg.train.weight_decay,
        clip_density_bound: cfg.train.clip_density_bound,
        seed,
        eval_every: cfg.train.eval_every,
        freeze_layers: Vec::new(),
    };
    let td = TrainData {
        x_train: &data.x_train,
        y_train: &data.y_train,
        x_eval: &data.x_eval,
        y_eval: &data.y_eval,
    };
    let mut net = Network::init(&spec, algo, seed).map_err(to_runtime)?;
    let mut tcfg = tcfg;
    match cfg.head {
        HeadMode::FrozenTeacher => {
            // pin the head at the teacher's: hidden units keep fixed roles,
            // so the planted first-layer blocks are the unique good support
            net.layers[1].weight = data.teacher_w2.clone();
            tcfg.freeze_layers = vec![1];
        }
        HeadMode::WarmTeacher => {
            net.layers[1].weight = data.teacher_w2.clone();
        }
        HeadMode::Free => {}
    }
    let out = train_network(net, &td, &tcfg, &schedule).map_err(to_runtime)?;
    let layer0_pruned = out.network.layers[0].prunable;
    let recovery = layer0_pruned.then(|| {
        let selected = &out.final_masks[0];
        let hits = selected.iter().filter(|g| data.planted.contains(g)).count();
        hits as f64 / data.planted.len() as f64
    });
    let active_groups = out
        .network
        .layers
        .iter()
        .filter(|l| l.prunable)
        .map(|l| l.active_count())
        .sum();
    Ok((
        PruningRow {
            seed,
            algo: choice.label().to_string(),
            sparsity,
            block_size,
            final_eval_loss: out.final_eval_loss,
            final_eval_accuracy: out.final_eval_accuracy,
            recovery,
            active_groups,
            final_masks: out.final_masks.clone(),
        },
        out,
    ))
}

fn metrics_trace(seed: u64, name: String, out: &TrainOutcome) -> TraceFile {
    TraceFile {
        seed,
        name,
        header: vec![
            "step".into(),
            "phase".into(),
            "loss".into(),
            "eval_loss".into(),
            "eval_accuracy".into(),
            "active_groups".into(),
        ],
        rows: out
            .metrics
            .iter()
            .map(|m| {
                vec![
                    m.step.to_string(),
                    format!("{:?}", m.phase).to_lowercase(),
                    crate::data::fmt_f64(m.loss),
                    crate::data::fmt_f64(m.eval_loss),
                    crate::data::fmt_f64(m.eval_accuracy),
                    m.active_groups.to_string(),
                ]
            })
            .collect(),
    }
}

pub fn run_compare(cfg: &PruningCompareConfig) -> Result<ExperimentOutput, CliError> {
    let mut rows: Vec<PruningRow> = Vec::new();
    let mut traces = Vec::new();
    for &sparsity in &cfg.sparsities {
        for &block in &cfg.block_sizes {
            for &choice in &cfg.algos {
                for &seed in &cfg.seeds {
                    let (row, out) =
                        run_one(cfg, choice, sparsity, block, cfg.sparsify_exponent, seed)?;
                    traces.push(metrics_trace(
                        seed,
                        format!(
                            "metrics_{}_s{}_b{block}",
                            choice.label(),
                            (sparsity * 100.0).round() as usize
                        ),
                        &out,
                    ));
                    rows.push(row);
                }
            }
        }
    }

    // the Table-2-shaped grid: median eval loss per (sparsity, block, algo)
    let mut cells = Vec::new();
    let mut summary_text = String::from(
        "sparsity  block  algo                           median_loss  median_recovery\n",
    );
    for &sparsity in &cfg.sparsities {
        for &block in &cfg.block_sizes {
            for &choice in &cfg.algos {
                let sel: Vec<&PruningRow> = rows
                    .iter()
                    .filter(|r| {
                        r.algo == choice.label()
                            && r.block_size == block
                            && (r.sparsity - sparsity).abs() < 1e-12
                    })
                    .collect();
                let losses: Vec<f64> = sel.iter().map(|r| r.final_eval_loss).collect();
                let recov: Vec<f64> = sel.iter().filter_map(|r| r.recovery).collect();
                let med_loss = median(&losses);
                let med_rec = if recov.is_empty() {
                    f64::NAN
                } else {
                    median(&recov)
                };
                summary_text.push_str(&format!(
                    "{sparsity:<9} {block:<6} {:<30} {med_loss:<12.5} {med_rec:.3}\n",
                    choice.label()
                ));
                cells.push(json!({
                    "sparsity": sparsity,
                    "block_size": block,
                    "algo": choice.label(),
                    "median_eval_loss": med_loss,
                    "median_recovery": if med_rec.is_nan() { None } else { Some(med_rec) },
                }));
            }
        }
    }

    Ok(ExperimentOutput {
        results: json!({"rows": rows, "grid": cells}),
        traces,
        summary_text,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub seed: u64,
    pub exponent: f64,
    pub final_eval_loss: f64,
    pub final_eval_accuracy: f64,
    pub recovery: Option<f64>,
}

pub fn run_ablation(cfg: &ScheduleAblationConfig) -> Result<ExperimentOutput, CliError> {
    let sparsity = cfg.base.sparsities[0];
    let block = cfg.base.block_sizes[0];
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &c in &cfg.exponents {
        for &seed in &cfg.seeds {
            let (row, out) = run_one(&cfg.base, AlgoChoice::SeqAttnPP, sparsity, block, c, seed)?;
            traces.push(metrics_trace(seed, format!("metrics_exponent{c}"), &out));
            rows.push(AblationRow {
                seed,
                exponent: c,
                final_eval_loss: row.final_eval_loss,
                final_eval_accuracy: row.final_eval_accuracy,
                recovery: row.recovery,
            });
        }
    }
    let mut summary_text = String::from("exponent  median_loss  median_accuracy\n");
    let mut cells = Vec::new();
    for &c in &cfg.exponents {
        let losses: Vec<f64> = rows
            .iter()
            .filter(|r| r.exponent == c)
            .map(|r| r.final_eval_loss)
            .collect();
        let accs: Vec<f64> = rows
            .iter()
            .filter(|r| r.exponent == c)
            .map(|r| r.final_eval_accuracy)
            .collect();
        summary_text.push_str(&format!(
            "{c:<9} {:<12.5} {:.4}\n",
            median(&losses),
            median(&accs)
        ));
        cells.push(json!({
            "exponent": c,
            "median_eval_loss": median(&losses),
            "median_eval_accuracy": median(&accs),
        }));
    }
    Ok(ExperimentOutput {
        results: json!({"rows": rows, "table": cells}),
        traces,
        summary_text,
    })
}
