//! The phase-scheduled pruning training loop.
//!
//! One loop drives all four algorithms; they differ in the forward transform
//! (attention scaling, powerpropagation reparameterization, or none) and in
//! how the mask is chosen when a frozen phase begins (attention weights for
//! the attention-guided algorithm, block Frobenius norms otherwise).
//! Optimizer state is reset at every phase boundary, pruning is per-layer
//! uniform, and layers with too few blocks are never pruned.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqattn::layer::PruneLayer;
use crate::seqattn::network::{Network, NetworkSpec, PruneAlgo, Targets};
use crate::seqattn::optimizer::{Optimizer, OptimizerKind};
use crate::seqattn::schedule::{sparsity_at, PhaseKind, PhaseSchedule};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Initial learning rate.
    pub lr0: f64,
    /// Final learning rate of an exponential decay; `None` keeps lr0.
    pub lr1: Option<f64>,
    pub optimizer: OptimizerKind,
    pub weight_decay: f64,
    /// Project attention logits into the per-layer density window after each
    /// step.
    pub clip_density_bound: bool,
    pub seed: u64,
    /// Recompute the eval metrics every this many steps.
    pub eval_every: usize,
    /// Layers whose kernels are held fixed (e.g. a pinned readout head).
    #[serde(default)]
    pub freeze_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            lr0: 0.05,
            lr1: None,
            optimizer: OptimizerKind::Momentum { beta: 0.9 },
            weight_decay: 1e-4,
            clip_density_bound: true,
            seed: 0,
            eval_every: 10,
            freeze_layers: Vec::new(),
        }
    }
}

/// One metrics line per training step.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub step: usize,
    pub phase: PhaseKind,
    pub loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    pub active_groups: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Retained group indices per layer (all groups for unpruned layers).
    pub final_masks: Vec<Vec<usize>>,
    pub metrics: Vec<MetricsRow>,
    pub final_eval_loss: f64,
    pub final_eval_accuracy: f64,
    pub network: Network,
}

/// Classification data for the loop.
pub struct TrainData<'a> {
    pub x_train: &'a Array2<f64>,
    pub y_train: &'a [usize],
    pub x_eval: &'a Array2<f64>,
    pub y_eval: &'a [usize],
}

fn retained_target(num_groups: usize, sparsity: f64) -> usize {
    (((1.0 - sparsity) * num_groups as f64) - 1e-9)
        .ceil()
        .max(1.0) as usize
}

fn selection_scores(layer: &PruneLayer, algo: PruneAlgo) -> Vec<f64> {
    match algo {
        PruneAlgo::SeqAttnPP => layer
            .attention()
            .expect("attention-guided layers carry logits"),
        // the powerpropagation effective norm is the squared Frobenius norm,
        // which ranks blocks identically to the Frobenius norm
        PruneAlgo::Acdc | PruneAlgo::Magnitude | PruneAlgo::PowerProp => layer.block_norms(),
    }
}

/// Train with a per-step observer (used by the invariants tests).
pub fn train_observed<F>(
    spec: &NetworkSpec,
    data: &TrainData,
    algo: PruneAlgo,
    cfg: &TrainConfig,
    schedule: &PhaseSchedule,
    observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, PhaseKind, &Network),
{
    let net = Network::init(spec, algo, cfg.seed)?;
    train_network_observed(net, data, cfg, schedule, observer)
}

/// Train a pre-built network (callers may warm-start weights first).
pub fn train_network_observed<F>(
    mut net: Network,
    data: &TrainData,
    cfg: &TrainConfig,
    schedule: &PhaseSchedule,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, PhaseKind, &Network),
{
    let algo = net.algo;
    schedule.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    if schedule.has_sparsification() && algo != PruneAlgo::SeqAttnPP {
        return Err(Error::InvalidArgument(
            "sparsification phases require the attention-guided algorithm".into(),
        ));
    }
    let sparsity = schedule.target_sparsity;
    for layer in &mut net.layers {
        if layer.prunable {
            let k = retained_target(layer.num_groups(), sparsity);
            if k == 0 || k > layer.num_groups() {
                return Err(Error::KExceedsGroupCount {
                    k,
                    t: layer.num_groups(),
                });
            }
            layer.k_target = k;
        }
    }

    let mut weight_opts: Vec<Optimizer> = net
        .layers
        .iter()
        .map(|l| Optimizer::new(cfg.optimizer, l.weight.len()))
        .collect();
    let mut logit_opts: Vec<Option<Optimizer>> = net
        .layers
        .iter()
        .map(|l| {
            l.logits
                .as_ref()
                .map(|lg| Optimizer::new(cfg.optimizer, lg.len()))
        })
        .collect();

    let total = schedule.total_steps;
    let m_train = data.x_train.nrows();
    if m_train == 0 || data.y_train.len() != m_train {
        return Err(Error::DimensionMismatch {
            expected: m_train,
            got: data.y_train.len(),
        });
    }
    let mut metrics = Vec::with_capacity(total);
    let mut last_eval = (f64::NAN, f64::NAN);
    let mut current_span = usize::MAX;
    let mut prev_kind: Option<PhaseKind> = None;

    for step in 0..total {
        let span = schedule.span_at(step);
        if span.index != current_span {
            // phase boundary: fresh optimizer state, then the mask transition
            for o in weight_opts.iter_mut() {
                o.reset();
            }
            for o in logit_opts.iter_mut().flatten() {
                o.reset();
            }
            for layer in net.layers.iter_mut().filter(|l| l.prunable) {
                match span.kind {
                    PhaseKind::Dense | PhaseKind::Sparsification => layer.activate_all(),
                    PhaseKind::Sparse | PhaseKind::Finetune => match algo {
                        PruneAlgo::SeqAttnPP => {
                            if prev_kind == Some(PhaseKind::Sparsification) {
                                // the ramp already landed on k_target; keep it
                                let scores = layer
                                    .attention()
                                    .expect("attention-guided layers carry logits");
                                let k = layer.k_target;
                                layer.shrink_active_to(&scores, k)?;
                            } else {
                                // snapshot from the last dense step
                                let count = layer.stored_topk.iter().filter(|&&a| a).count();
                                if count == layer.k_target {
                                    layer.active = layer.stored_topk.clone();
                                } else {
                                    let scores = layer
                                        .attention()
                                        .expect("attention-guided layers carry logits");
                                    layer.set_active_top_k(&scores, layer.k_target)?;
                                }
                            }
                        }
                        PruneAlgo::Acdc | PruneAlgo::Magnitude | PruneAlgo::PowerProp => {
                            let scores = layer.block_norms();
                            layer.set_active_top_k(&scores, layer.k_target)?;
                        }
                    },
                }
            }
            current_span = span.index;
        }

        // sequential wrap-around batching
        let start = (step * cfg.batch_size) % m_train;
        let mut xb = Array2::zeros((cfg.batch_size, net.input_dim()));
        let mut yb = Vec::with_capacity(cfg.batch_size);
        for i in 0..cfg.batch_size {
            let row = (start + i) % m_train;
            xb.row_mut(i).assign(&data.x_train.row(row));
            yb.push(data.y_train[row]);
        }

        let cache = net.forward(&xb)?;
        let loss = net.loss_value(&cache.output, &Targets::Labels(&yb))?;
        if !loss.is_finite() {
            return Err(Error::TrainingAborted(format!(
                "loss {loss} at step {step}"
            )));
        }
        let mut grads = net.backward(&cache, &Targets::Labels(&yb))?;
        for dw in &grads.weights {
            if dw.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingAborted(format!(
                    "non-finite kernel gradient at step {step}"
                )));
            }
        }

        // coupled weight decay on active kernel entries and on the logits
        if cfg.weight_decay > 0.0 {
            for (li, layer) in net.layers.iter().enumerate() {
                let n_out = layer.n_out();
                for r in 0..layer.n_in() {
                    for c in 0..n_out {
                        let g = layer.group_of_entry(r * n_out + c);
                        if !layer.prunable || layer.active[g] {
                            grads.weights[li][(r, c)] += cfg.weight_decay * layer.weight[(r, c)];
                        }
                    }
                }
                if let (Some(dl), Some(lg)) = (&mut grads.logits[li], &layer.logits) {
                    for (d, l) in dl.iter_mut().zip(lg) {
                        *d += cfg.weight_decay * l;
                    }
                }
            }
        }

        let lr = match cfg.lr1 {
            Some(lr1) if total > 1 => {
                cfg.lr0 * (lr1 / cfg.lr0).powf(step as f64 / (total - 1) as f64)
            }
            _ => cfg.lr0,
        };
        for (li, layer) in net.layers.iter_mut().enumerate() {
            if !cfg.freeze_layers.contains(&li) {
                let gw = grads.weights[li]
                    .as_slice()
                    .expect("gradients are contiguous");
                weight_opts[li].step(
                    layer.weight.as_slice_mut().expect("weights are contiguous"),
                    gw,
                    lr,
                );
            }
            if let (Some(lg), Some(dl), Some(opt)) = (
                layer.logits.as_mut(),
                grads.logits[li].as_ref(),
                logit_opts[li].as_mut(),
            ) {
                opt.step(lg, dl, lr);
            }
        }

        if algo == PruneAlgo::SeqAttnPP && cfg.clip_density_bound {
            for layer in net.layers.iter_mut().filter(|l| l.prunable) {
                layer.clip_logits_to_density();
            }
        }

        match span.kind {
            PhaseKind::Sparsification => {
                let tau = schedule.phase_progress(step);
                let sp = sparsity_at(tau, sparsity, schedule.sparsify_exponent)?;
                for layer in net.layers.iter_mut().filter(|l| l.prunable) {
                    let g = layer.num_groups();
                    let allowed = retained_target(g, sp.min(sparsity)).max(layer.k_target);
                    let scores = selection_scores(layer, algo);
                    layer.shrink_active_to(&scores, allowed)?;
                }
            }
            PhaseKind::Dense if algo == PruneAlgo::SeqAttnPP => {
                for layer in net.layers.iter_mut().filter(|l| l.prunable) {
                    let scores = layer
                        .attention()
                        .expect("attention-guided layers carry logits");
                    layer.refresh_stored_topk(&scores)?;
                }
            }
            _ => {}
        }

        if step % cfg.eval_every == 0 || step + 1 == total {
            last_eval = net.evaluate(data.x_eval, &Targets::Labels(data.y_eval))?;
        }
        let active_groups: usize = net
            .layers
            .iter()
            .filter(|l| l.prunable)
            .map(|l| l.active_count())
            .sum();
        metrics.push(MetricsRow {
            step,
            phase: span.kind,
            loss,
            eval_loss: last_eval.0,
            eval_accuracy: last_eval.1,
            active_groups,
        });
        observer(step, span.kind, &net);
        prev_kind = Some(span.kind);
    }

    // the run must end at the target sparsity exactly
    for (li, layer) in net.layers.iter().enumerate() {
        if layer.prunable && layer.active_count() != layer.k_target {
            return Err(Error::TrainingAborted(format!(
                "layer {li} ended with {} active groups, expected {}",
                layer.active_count(),
                layer.k_target
            )));
        }
    }
    let (final_eval_loss, final_eval_accuracy) = last_eval;
    let final_masks = net.layers.iter().map(|l| l.retained_groups()).collect();
    Ok(TrainOutcome {
        final_masks,
        metrics,
        final_eval_loss,
        final_eval_accuracy,
        network: net,
    })
}

/// Train without instrumentation.
pub fn train(
    spec: &NetworkSpec,
    data: &TrainData,
    algo: PruneAlgo,
    cfg: &TrainConfig,
    schedule: &PhaseSchedule,
) -> Result<TrainOutcome> {
    train_observed(spec, data, algo, cfg, schedule, |_, _, _| {})
}

/// Train a pre-built network without instrumentation.
pub fn train_network(
    net: Network,
    data: &TrainData,
    cfg: &TrainConfig,
    schedule: &PhaseSchedule,
) -> Result<TrainOutcome> {
    train_network_observed(net, data, cfg, schedule, |_, _, _| {})
}

/// The schedule an algorithm uses by default at a given budget: the
/// attention-guided algorithm gets sparsification cycles, the alternating
/// baseline gets dense/sparse cycles, and the one-shot baselines train dense
/// and finetune.
pub fn default_schedule_for(
    algo: PruneAlgo,
    total_steps: usize,
    target_sparsity: f64,
    sparsify_exponent: f64,
    cycles: usize,
) -> Result<PhaseSchedule> {
    match algo {
        PruneAlgo::SeqAttnPP => PhaseSchedule::seqattnpp(
            total_steps,
            target_sparsity,
            sparsify_exponent,
            0.1,
            cycles,
            0.15,
        ),
        PruneAlgo::Acdc => PhaseSchedule::acdc(total_steps, target_sparsity, 0.1, cycles, 0.15),
        PruneAlgo::Magnitude | PruneAlgo::PowerProp => {
            PhaseSchedule::dense_finetune(total_steps, target_sparsity, 0.15)
        }
    }
}
