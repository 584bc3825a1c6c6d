//! A dense layer whose weight matrix is partitioned into square blocks, each
//! block a pruning candidate with an optional trainable attention logit and a
//! binary mask bit.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::groups::{top_k_groups, GroupPartition};
use crate::rng::{self, CrateRng};

#[derive(Debug, Clone)]
pub struct PruneLayer {
    /// Kernel, `n_in x n_out`.
    pub weight: Array2<f64>,
    /// One logit per block; present only when attention guides this layer.
    pub logits: Option<Vec<f64>>,
    /// Block partition of the `n_in * n_out` entries (row-major flattening).
    pub partition: Arc<GroupPartition>,
    /// Flat entry index -> block index.
    group_of: Vec<usize>,
    /// Current mask, one bit per block (all true while dense).
    pub active: Vec<bool>,
    /// Top-k snapshot refreshed during dense phases.
    pub stored_topk: Vec<bool>,
    /// Retained block count once pruned.
    pub k_target: usize,
    pub prunable: bool,
    pub block_size: usize,
}

impl PruneLayer {
    pub fn new(
        n_in: usize,
        n_out: usize,
        block_size: usize,
        prunable: bool,
        with_logits: bool,
        rng: &mut CrateRng,
    ) -> Result<Self> {
        let partition = Arc::new(GroupPartition::blocks(n_in, n_out, block_size)?);
        let t = partition.num_groups();
        let mut group_of = vec![0usize; n_in * n_out];
        for (g, group) in partition.groups().iter().enumerate() {
            for &i in group {
                group_of[i] = g;
            }
        }
        let scale = (2.0 / n_in as f64).sqrt();
        let weight = Array2::from_shape_fn((n_in, n_out), |_| scale * rng::normal(rng));
        Ok(Self {
            weight,
            logits: (prunable && with_logits).then(|| vec![0.0; t]),
            partition,
            group_of,
            active: vec![true; t],
            stored_topk: vec![true; t],
            k_target: t,
            prunable,
            block_size,
        })
    }

    pub fn n_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.partition.num_groups()
    }

    pub fn group_of_entry(&self, flat: usize) -> usize {
        self.group_of[flat]
    }

    /// Attention weights `A = G * softmax(logits)`: positive, summing to the
    /// block count, invariant to adding a constant to every logit.
    pub fn attention(&self) -> Option<Vec<f64>> {
        let logits = self.logits.as_ref()?;
        let g = logits.len() as f64;
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let sum: f64 = exps.iter().sum();
        Some(exps.into_iter().map(|e| g * e / sum).collect())
    }

    /// Per-block Frobenius norms of the kernel.
    pub fn block_norms(&self) -> Vec<f64> {
        let flat = self.weight.as_slice().expect("weights are contiguous");
        self.partition
            .groups()
            .iter()
            .map(|g| g.iter().map(|&i| flat[i] * flat[i]).sum::<f64>().sqrt())
            .collect()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn retained_groups(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(g, &a)| a.then_some(g))
            .collect()
    }

    pub fn activate_all(&mut self) {
        self.active.iter_mut().for_each(|a| *a = true);
    }

    /// Replace the mask with the top-k blocks by score.
    pub fn set_active_top_k(&mut self, scores: &[f64], k: usize) -> Result<()> {
        let t = self.num_groups();
        if k > t {
            return Err(Error::KExceedsGroupCount { k, t });
        }
        let keep = top_k_groups(scores, k)?;
        self.active.iter_mut().for_each(|a| *a = false);
        for g in keep {
            self.active[g] = true;
        }
        Ok(())
    }

    /// Shrink the active set to its top `m` blocks by score; blocks already
    /// pruned stay pruned (scores of inactive blocks are ignored), so the
    /// active set only ever loses members.
    pub fn shrink_active_to(&mut self, scores: &[f64], m: usize) -> Result<()> {
        let current = self.active_count();
        if m >= current {
            return Ok(());
        }
        let masked: Vec<f64> = scores
            .iter()
            .enumerate()
            .map(|(g, &s)| if self.active[g] { s } else { f64::NEG_INFINITY })
            .collect();
        let keep = top_k_groups(&masked, m)?;
        self.active.iter_mut().for_each(|a| *a = false);
        for g in keep {
            self.active[g] = true;
        }
        Ok(())
    }

    /// Refresh the dense-phase top-k snapshot from the given scores.
    pub fn refresh_stored_topk(&mut self, scores: &[f64]) -> Result<()> {
        let keep = top_k_groups(scores, self.k_target.min(self.num_groups()))?;
        self.stored_topk.iter_mut().for_each(|a| *a = false);
        for g in keep {
            self.stored_topk[g] = true;
        }
        Ok(())
    }

    /// Project logits into a window of half-width ln(1/density) around their
    /// mean. The attention weights are shift-invariant in the logits, so this
    /// enforces the same dynamic-range cap (a factor of density^-2 between
    /// the largest and smallest attention weight) as an absolute window,
    /// without pinning every non-leader to a common bound.
    pub fn clip_logits_to_density(&mut self) {
        let g = self.num_groups() as f64;
        let density = self.k_target as f64 / g;
        if let Some(logits) = self.logits.as_mut() {
            let mean = logits.iter().sum::<f64>() / logits.len() as f64;
            let half_width = (1.0 / density).ln();
            let lo = mean - half_width;
            let hi = mean + half_width;
            for l in logits.iter_mut() {
                *l = l.clamp(lo, hi);
            }
        }
    }
}
