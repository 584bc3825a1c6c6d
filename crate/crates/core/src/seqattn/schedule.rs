//! Training phases and the exponential sparsity ramp.
//!
//! A schedule is a contiguous list of phases covering the whole run:
//! `Dense` trains everything, `Sparsification` ramps the active-group count
//! down along `sparsity(t) = s (1 - e^{-ct}) / (1 - e^{-c})`, `Sparse` and
//! `Finetune` train with the mask frozen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Dense,
    Sparsification,
    Sparse,
    Finetune,
}

impl PhaseKind {
    /// Phases that train with a frozen mask.
    pub fn is_frozen(&self) -> bool {
        matches!(self, PhaseKind::Sparse | PhaseKind::Finetune)
    }
}

/// One phase as a fraction interval of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: f64,
    pub end: f64,
}

/// A validated phase layout with the sparsification ramp parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub total_steps: usize,
    pub phases: Vec<Phase>,
    /// Ramp exponent c (the default 4 prunes aggressively early).
    pub sparsify_exponent: f64,
    /// Target sparsity s in (0, 1): the fraction of groups removed.
    pub target_sparsity: f64,
}

/// A phase resolved to a step range `[first_step, first_step + len)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpan {
    pub kind: PhaseKind,
    pub index: usize,
    pub first_step: usize,
    pub len: usize,
}

/// The exponential sparsity ramp `s (1 - e^{-ct}) / (1 - e^{-c})`, strictly
/// increasing and concave in `t` over [0, 1] with endpoints 0 and `s`.
pub fn sparsity_at(t: f64, s: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "phase progress must lie in [0, 1], got {t}"
        )));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target sparsity must lie in (0, 1), got {s}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ramp exponent must be positive, got {c}"
        )));
    }
    Ok(s * (1.0 - (-c * t).exp()) / (1.0 - (-c).exp()))
}

impl PhaseSchedule {
    pub fn new(
        total_steps: usize,
        phases: Vec<Phase>,
        sparsify_exponent: f64,
        target_sparsity: f64,
    ) -> Result<Self> {
        let s = Self {
            total_steps,
            phases,
            sparsify_exponent,
            target_sparsity,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::InvalidArgument(
                "total_steps must be positive".into(),
            ));
        }
        if self.phases.is_empty() {
            return Err(Error::InvalidArgument("schedule needs phases".into()));
        }
        if !(self.target_sparsity > 0.0 && self.target_sparsity < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target sparsity must lie in (0, 1), got {}",
                self.target_sparsity
            )));
        }
        if !(self.sparsify_exponent > 0.0) {
            return Err(Error::InvalidArgument(
                "sparsify exponent must be positive".into(),
            ));
        }
        let mut cursor = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            if (p.start - cursor).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "phase {i} starts at {} but the previous phase ends at {cursor}",
                    p.start
                )));
            }
            if p.end <= p.start {
                return Err(Error::InvalidArgument(format!("phase {i} is empty")));
            }
            cursor = p.end;
        }
        if (cursor - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "phases cover [0, {cursor}], expected [0, 1]"
            )));
        }
        for span in self.spans() {
            if span.len == 0 {
                return Err(Error::InvalidArgument(format!(
                    "phase {} resolves to zero steps; increase total_steps",
                    span.index
                )));
            }
        }
        Ok(())
    }

    /// Phases resolved to integer step ranges covering `[0, total_steps)`.
    pub fn spans(&self) -> Vec<PhaseSpan> {
        let t = self.total_steps as f64;
        let mut spans = Vec::with_capacity(self.phases.len());
        let mut prev = 0usize;
        for (i, p) in self.phases.iter().enumerate() {
            let end = if i + 1 == self.phases.len() {
                self.total_steps
            } else {
                (p.end * t).round() as usize
            };
            spans.push(PhaseSpan {
                kind: p.kind,
                index: i,
                first_step: prev,
                len: end.saturating_sub(prev),
            });
            prev = end;
        }
        spans
    }

    /// The span containing a step.
    pub fn span_at(&self, step: usize) -> PhaseSpan {
        let spans = self.spans();
        for span in &spans {
            if step < span.first_step + span.len {
                return *span;
            }
        }
        *spans.last().expect("schedule has phases")
    }

    /// Within-phase progress in (0, 1], reaching exactly 1 on the phase's
    /// last step so ramps land on their target.
    pub fn phase_progress(&self, step: usize) -> f64 {
        let span = self.span_at(step);
        (step + 1 - span.first_step) as f64 / span.len as f64
    }

    /// Whether any phase is a sparsification ramp.
    pub fn has_sparsification(&self) -> bool {
        self.phases
            .iter()
            .any(|p| p.kind == PhaseKind::Sparsification)
    }

    /// Dense warmup, `cycles` rounds of sparsification -> sparse -> dense
    /// (the final cycle drops its dense tail), then a frozen finetune phase.
    pub fn seqattnpp(
        total_steps: usize,
        target_sparsity: f64,
        sparsify_exponent: f64,
        dense_frac: f64,
        cycles: usize,
        finetune_frac: f64,
    ) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::InvalidArgument("need at least one cycle".into()));
        }
        let middle = 1.0 - dense_frac - finetune_frac;
        if middle <= 0.0 {
            return Err(Error::InvalidArgument(
                "dense and finetune fractions leave no room for cycles".into(),
            ));
        }
        let mut phases = vec![Phase {
            kind: PhaseKind::Dense,
            start: 0.0,
            end: dense_frac,
        }];
        let cycle_len = middle / cycles as f64;
        let mut cursor = dense_frac;
        for cyc in 0..cycles {
            let last = cyc + 1 == cycles;
            // last cycle: sparsification then sparse, no dense tail
            let parts: &[(PhaseKind, f64)] = if last {
                &[(PhaseKind::Sparsification, 0.5), (PhaseKind::Sparse, 0.5)]
            } else {
                &[
                    (PhaseKind::Sparsification, 1.0 / 3.0),
                    (PhaseKind::Sparse, 1.0 / 3.0),
                    (PhaseKind::Dense, 1.0 / 3.0),
                ]
            };
            for &(kind, frac) in parts {
                let end = cursor + cycle_len * frac;
                phases.push(Phase {
                    kind,
                    start: cursor,
                    end,
                });
                cursor = end;
            }
        }
        // snap the last cycle boundary before the finetune tail
        if let Some(last) = phases.last_mut() {
            last.end = 1.0 - finetune_frac;
        }
        phases.push(Phase {
            kind: PhaseKind::Finetune,
            start: 1.0 - finetune_frac,
            end: 1.0,
        });
        Self::new(total_steps, phases, sparsify_exponent, target_sparsity)
    }

    /// Dense warmup, `cycles` equal sparse -> dense rounds, final frozen
    /// sparse finetune (the alternating compressed/decompressed layout).
    pub fn acdc(
        total_steps: usize,
        target_sparsity: f64,
        dense_frac: f64,
        cycles: usize,
        finetune_frac: f64,
    ) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::InvalidArgument("need at least one cycle".into()));
        }
        let middle = 1.0 - dense_frac - finetune_frac;
        if middle <= 0.0 {
            return Err(Error::InvalidArgument(
                "dense and finetune fractions leave no room for cycles".into(),
            ));
        }
        let mut phases = vec![Phase {
            kind: PhaseKind::Dense,
            start: 0.0,
            end: dense_frac,
        }];
        let cycle_len = middle / cycles as f64;
        let mut cursor = dense_frac;
        for _ in 0..cycles {
            let mid = cursor + 0.5 * cycle_len;
            let end = cursor + cycle_len;
            phases.push(Phase {
                kind: PhaseKind::Sparse,
                start: cursor,
                end: mid,
            });
            phases.push(Phase {
                kind: PhaseKind::Dense,
                start: mid,
                end,
            });
            cursor = end;
        }
        if let Some(last) = phases.last_mut() {
            last.end = 1.0 - finetune_frac;
        }
        phases.push(Phase {
            kind: PhaseKind::Finetune,
            start: 1.0 - finetune_frac,
            end: 1.0,
        });
        Self::new(total_steps, phases, 4.0, target_sparsity)
    }

    /// One dense phase followed by a frozen finetune tail (one-shot pruning
    /// at the boundary).
    pub fn dense_finetune(
        total_steps: usize,
        target_sparsity: f64,
        finetune_frac: f64,
    ) -> Result<Self> {
        let phases = vec![
            Phase {
                kind: PhaseKind::Dense,
                start: 0.0,
                end: 1.0 - finetune_frac,
            },
            Phase {
                kind: PhaseKind::Finetune,
                start: 1.0 - finetune_frac,
                end: 1.0,
            },
        ];
        Self::new(total_steps, phases, 4.0, target_sparsity)
    }
}
