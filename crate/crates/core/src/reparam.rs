//! Masked reparameterizations of a convex loss and their equivalent group
//! regularizers.
//!
//! Three mask families are supported, each trading the pair `(w, beta)` for
//! an equivalent problem in the effective coefficients `u`:
//!
//! - softmax masks `exp(w_i) * beta|_Ti` with `lambda (|w|_2^2 + |beta|_2^2)`,
//!   equivalent to the Lambert-W-induced group penalty on `u`;
//! - l1-regularized masks `w_i * beta|_Ti` with `lambda (|w|_1 + |beta|_2^2)`,
//!   equivalent to `(3/2) 2^(1/3) lambda * sum_i |u|_Ti|^(2/3)`;
//! - group powerpropagation `|beta|_Ti|_2 * beta|_Ti` with
//!   `lambda |beta|_2^2`, equivalent to the group LASSO penalty on `u`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupPartition, GroupVector};
use crate::objectives::{ConvexObjective, SmoothFn};
use crate::regularizers::{lambert_w, QFunction, NORM_CLAMP};
use crate::solvers::{self, GroupPenalty, ProxGroup, SolveResult, SolverConfig};

/// Coefficient of the l1-mask equivalent penalty: (3/2) * 2^(1/3).
pub fn l1_mask_penalty_coefficient() -> f64 {
    1.5 * 2f64.powf(1.0 / 3.0)
}

/// Which mask family wraps the base loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Softmax,
    L1,
    #[serde(rename = "powerprop")]
    PowerProp,
}

impl MaskKind {
    /// Whether this family carries a separate mask vector `w`.
    pub fn has_mask_vector(&self) -> bool {
        !matches!(self, MaskKind::PowerProp)
    }
}

/// A convex loss wrapped by one of the mask families.
pub struct MaskedObjective {
    base: Arc<dyn ConvexObjective>,
    kind: MaskKind,
    lambda: f64,
}

impl MaskedObjective {
    pub fn new(base: Arc<dyn ConvexObjective>, kind: MaskKind, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mask regularization weight must be positive, got {lambda}"
            )));
        }
        Ok(Self { base, kind, lambda })
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn partition(&self) -> &Arc<GroupPartition> {
        self.base.partition()
    }

    pub fn base(&self) -> &Arc<dyn ConvexObjective> {
        &self.base
    }

    fn num_groups(&self) -> usize {
        self.partition().num_groups()
    }

    fn check_mask_shape(&self, w: Option<&[f64]>) -> Result<()> {
        match (self.kind.has_mask_vector(), w) {
            (true, Some(wv)) if wv.len() == self.num_groups() => Ok(()),
            (true, Some(wv)) => Err(Error::DimensionMismatch {
                expected: self.num_groups(),
                got: wv.len(),
            }),
            (true, None) => Err(Error::InvalidArgument(
                "this mask kind requires a mask vector".into(),
            )),
            (false, None) => Ok(()),
            (false, Some(_)) => Err(Error::InvalidArgument(
                "powerpropagation carries no separate mask vector".into(),
            )),
        }
    }

    /// The effective coefficients `u` built group-wise by the family's
    /// substitution.
    pub fn effective_coefficients(
        &self,
        w: Option<&[f64]>,
        beta: &GroupVector,
    ) -> Result<GroupVector> {
        self.check_mask_shape(w)?;
        let partition = self.partition();
        let values = beta.values();
        let mut u = vec![0.0; partition.n()];
        for (gi, group) in partition.groups().iter().enumerate() {
            let scale = match self.kind {
                MaskKind::Softmax => w.unwrap()[gi].exp(),
                MaskKind::L1 => w.unwrap()[gi],
                MaskKind::PowerProp => group
                    .iter()
                    .map(|&i| values[i] * values[i])
                    .sum::<f64>()
                    .sqrt(),
            };
            for &i in group {
                u[i] = scale * values[i];
            }
        }
        GroupVector::new(partition.clone(), u)
    }

    /// The masked total objective exactly as the family defines it.
    pub fn masked_value(&self, w: Option<&[f64]>, beta: &GroupVector) -> Result<f64> {
        let u = self.effective_coefficients(w, beta)?;
        let data = self.base.value(u.values())?;
        let beta_sq: f64 = beta.values().iter().map(|b| b * b).sum();
        let reg = match self.kind {
            MaskKind::Softmax => {
                let w_sq: f64 = w.unwrap().iter().map(|x| x * x).sum();
                self.lambda * (w_sq + beta_sq)
            }
            MaskKind::L1 => {
                let w_l1: f64 = w.unwrap().iter().map(|x| x.abs()).sum();
                self.lambda * (w_l1 + beta_sq)
            }
            MaskKind::PowerProp => self.lambda * beta_sq,
        };
        Ok(data + reg)
    }

    /// Analytic gradients of the masked objective. For the l1 mask the `w`
    /// part uses `sign(w)` (the objective is nondifferentiable at w_i = 0);
    /// the powerpropagation data term has zero derivative at `beta|_Ti = 0`.
    pub fn masked_gradient(
        &self,
        w: Option<&[f64]>,
        beta: &GroupVector,
    ) -> Result<(Option<Vec<f64>>, Vec<f64>)> {
        let u = self.effective_coefficients(w, beta)?;
        let g = self.base.gradient(u.values())?;
        let partition = self.partition();
        let values = beta.values();
        let mut grad_beta = vec![0.0; partition.n()];
        let mut grad_w = self
            .kind
            .has_mask_vector()
            .then(|| vec![0.0; self.num_groups()]);
        for (gi, group) in partition.groups().iter().enumerate() {
            match self.kind {
                MaskKind::Softmax => {
                    let e = w.unwrap()[gi].exp();
                    let mut gu_dot_u = 0.0;
                    for &i in group {
                        grad_beta[i] = e * g[i] + 2.0 * self.lambda * values[i];
                        gu_dot_u += g[i] * u.values()[i];
                    }
                    grad_w.as_mut().unwrap()[gi] = gu_dot_u + 2.0 * self.lambda * w.unwrap()[gi];
                }
                MaskKind::L1 => {
                    let wi = w.unwrap()[gi];
                    let mut gu_dot_beta = 0.0;
                    for &i in group {
                        grad_beta[i] = wi * g[i] + 2.0 * self.lambda * values[i];
                        gu_dot_beta += g[i] * values[i];
                    }
                    grad_w.as_mut().unwrap()[gi] = gu_dot_beta + self.lambda * sign(wi);
                }
                MaskKind::PowerProp => {
                    let r: f64 = group
                        .iter()
                        .map(|&i| values[i] * values[i])
                        .sum::<f64>()
                        .sqrt();
                    if r == 0.0 {
                        // the map beta -> |beta| beta has zero Jacobian at 0
                        for &i in group {
                            grad_beta[i] = 2.0 * self.lambda * values[i];
                        }
                    } else {
                        let mut gu_dot_beta = 0.0;
                        for &i in group {
                            gu_dot_beta += g[i] * values[i];
                        }
                        for &i in group {
                            grad_beta[i] = r * g[i]
                                + (gu_dot_beta / r) * values[i]
                                + 2.0 * self.lambda * values[i];
                        }
                    }
                }
            }
        }
        Ok((grad_w, grad_beta))
    }

    /// The family's equivalent regularized objective at `u`: the data term
    /// plus the penalty from the corresponding equivalence.
    pub fn equivalent_regularized_value(&self, u: &GroupVector) -> Result<f64> {
        let data = self.base.value(u.values())?;
        let penalty = self.equivalent_penalty().value_of_norms(&u.group_norms())?;
        Ok(data + penalty)
    }

    /// The equivalent penalty as a reusable [`GroupPenalty`].
    pub fn equivalent_penalty(&self) -> SeparableQPenalty {
        match self.kind {
            MaskKind::Softmax => {
                SeparableQPenalty::new(QFunction::Lambert, self.lambda, self.partition().clone())
            }
            MaskKind::L1 => SeparableQPenalty::new(
                QFunction::Power { p: 2.0 / 3.0 },
                l1_mask_penalty_coefficient() * self.lambda,
                self.partition().clone(),
            ),
            MaskKind::PowerProp => {
                SeparableQPenalty::new(QFunction::Abs, self.lambda, self.partition().clone())
            }
        }
    }

    /// The mask/coefficient pair that attains the masked objective value
    /// equal to the equivalent regularized value at `u` (the optimal mask for
    /// fixed effective coefficients).
    pub fn lift(&self, u: &GroupVector) -> Result<(Option<Vec<f64>>, GroupVector)> {
        let partition = self.partition();
        let norms = u.group_norms();
        let mut beta = vec![0.0; partition.n()];
        let mut w = self
            .kind
            .has_mask_vector()
            .then(|| vec![0.0; self.num_groups()]);
        for (gi, group) in partition.groups().iter().enumerate() {
            let a = norms[gi];
            match self.kind {
                MaskKind::Softmax => {
                    let wi = lambert_w(2.0 * a * a)? / 2.0;
                    w.as_mut().unwrap()[gi] = wi;
                    let inv = (-wi).exp();
                    for &i in group {
                        beta[i] = u.values()[i] * inv;
                    }
                }
                MaskKind::L1 => {
                    if a > 0.0 {
                        let wi = 2f64.powf(1.0 / 3.0) * a.powf(2.0 / 3.0);
                        w.as_mut().unwrap()[gi] = wi;
                        for &i in group {
                            beta[i] = u.values()[i] / wi;
                        }
                    }
                }
                MaskKind::PowerProp => {
                    if a > 0.0 {
                        let inv = 1.0 / a.sqrt();
                        for &i in group {
                            beta[i] = u.values()[i] * inv;
                        }
                    }
                }
            }
        }
        Ok((w, GroupVector::new(partition.clone(), beta)?))
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Separable group penalty `coeff * sum_i q(|u|_Ti|_2)` (no `q_inv` around the
/// sum), the right-hand-side form of the mask equivalences.
#[derive(Debug, Clone)]
pub struct SeparableQPenalty {
    q: QFunction,
    coeff: f64,
    partition: Arc<GroupPartition>,
}

impl SeparableQPenalty {
    pub fn new(q: QFunction, coeff: f64, partition: Arc<GroupPartition>) -> Self {
        Self {
            q,
            coeff,
            partition,
        }
    }

    pub fn q(&self) -> QFunction {
        self.q
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }
}

impl GroupPenalty for SeparableQPenalty {
    fn partition(&self) -> &Arc<GroupPartition> {
        &self.partition
    }

    fn value_of_norms(&self, norms: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for &s in norms {
            sum += self.q.eval(s)?;
        }
        Ok(self.coeff * sum)
    }

    fn mm_weights(&self, norms: &[f64]) -> Result<Vec<f64>> {
        norms
            .iter()
            .map(|&s| Ok(self.coeff * self.q.derivative(s.max(NORM_CLAMP))?))
            .collect()
    }
}

/// Flat layout of the masked problem's variables: the mask logits (if any)
/// followed by `beta`. Smooth for the softmax and powerprop families; for the
/// l1 family this exposes only the smooth part (data term plus the l2 pieces)
/// so the `|w|_1` term can be handled by a prox step.
pub struct MaskedSmooth<'a> {
    masked: &'a MaskedObjective,
    include_w_l1: bool,
}

impl MaskedObjective {
    /// The full masked objective as a flat smooth function (the `|w|_1` term
    /// included via its sign subgradient), for derivative checks.
    pub fn as_smooth(&self) -> MaskedSmooth<'_> {
        MaskedSmooth {
            masked: self,
            include_w_l1: true,
        }
    }
}

impl MaskedSmooth<'_> {
    fn w_len(&self) -> usize {
        if self.masked.kind.has_mask_vector() {
            self.masked.num_groups()
        } else {
            0
        }
    }

    fn split<'b>(&self, x: &'b [f64]) -> (Option<&'b [f64]>, &'b [f64]) {
        let wl = self.w_len();
        if wl == 0 {
            (None, x)
        } else {
            (Some(&x[..wl]), &x[wl..])
        }
    }
}

impl SmoothFn for MaskedSmooth<'_> {
    fn dim(&self) -> usize {
        self.w_len() + self.masked.partition().n()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (w, beta) = self.split(x);
        let bv = GroupVector::new(self.masked.partition().clone(), beta.to_vec())?;
        let mut v = self.masked.masked_value(w, &bv)?;
        if !self.include_w_l1 {
            if let Some(wv) = w {
                v -= self.masked.lambda * wv.iter().map(|x| x.abs()).sum::<f64>();
            }
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (w, beta) = self.split(x);
        let bv = GroupVector::new(self.masked.partition().clone(), beta.to_vec())?;
        let (gw, gb) = self.masked.masked_gradient(w, &bv)?;
        let mut out = Vec::with_capacity(x.len());
        if let Some(mut gwv) = gw {
            if !self.include_w_l1 {
                for (gi, wi) in gwv.iter_mut().zip(w.unwrap()) {
                    *gi -= self.masked.lambda * sign(*wi);
                }
            }
            out.extend(gwv);
        }
        out.extend(gb);
        Ok(out)
    }
}

/// Minimize the masked objective from a given start. Softmax and powerprop
/// run plain gradient descent on the joint variables; the l1 family runs
/// proximal gradient with soft-thresholding on the mask coordinates.
pub fn solve_masked(
    masked: &MaskedObjective,
    w0: Option<&[f64]>,
    beta0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    masked.check_mask_shape(w0)?;
    let mut x0 = Vec::new();
    if let Some(w) = w0 {
        x0.extend_from_slice(w);
    }
    x0.extend_from_slice(beta0);
    match masked.kind {
        MaskKind::Softmax | MaskKind::PowerProp => {
            let f = MaskedSmooth {
                masked,
                include_w_l1: true,
            };
            solvers::solve_smooth(&f, &x0, cfg)
        }
        MaskKind::L1 => {
            let f = MaskedSmooth {
                masked,
                include_w_l1: false,
            };
            let prox: Vec<ProxGroup> = (0..masked.num_groups())
                .map(|i| ProxGroup {
                    indices: vec![i],
                    weight: masked.lambda,
                })
                .collect();
            solvers::solve_proximal(&f, &prox, &x0, cfg)
        }
    }
}

/// Split a stacked solution back into `(w, beta)`.
pub fn split_masked_solution(masked: &MaskedObjective, x: &[f64]) -> (Option<Vec<f64>>, Vec<f64>) {
    if masked.kind.has_mask_vector() {
        let wl = masked.num_groups();
        (Some(x[..wl].to_vec()), x[wl..].to_vec())
    } else {
        (None, x.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{central_difference_gradient, gradient_rel_error};
    use crate::rng;
    use crate::synth;

    fn small_masked(seed: u64, kind: MaskKind, lambda: f64) -> MaskedObjective {
        let inst = synth::random_regression(seed, 10, 6, 3, 1, 0.05);
        MaskedObjective::new(Arc::new(inst.objective), kind, lambda).unwrap()
    }

    fn gv(m: &MaskedObjective, values: Vec<f64>) -> GroupVector {
        GroupVector::new(m.partition().clone(), values).unwrap()
    }

    #[test]
    fn softmax_zero_logits_reduce_to_plain_loss_plus_ridge() {
        let m = small_masked(1, MaskKind::Softmax, 0.7);
        let mut r = rng::seeded(2);
        let beta = gv(&m, rng::normal_vec(&mut r, 6));
        let w = vec![0.0; m.partition().num_groups()];
        let got = m.masked_value(Some(&w), &beta).unwrap();
        let bsq: f64 = beta.values().iter().map(|b| b * b).sum();
        let want = m.base().value(beta.values()).unwrap() + 0.7 * bsq;
        assert!((got - want).abs() < 1e-12);
        // exp(0) = 1: effective coefficients equal beta
        let u = m.effective_coefficients(Some(&w), &beta).unwrap();
        assert_eq!(u.values(), beta.values());
    }

    #[test]
    fn powerprop_at_zero_is_loss_at_zero() {
        let m = small_masked(3, MaskKind::PowerProp, 0.5);
        let beta = gv(&m, vec![0.0; 6]);
        let got = m.masked_value(None, &beta).unwrap();
        let want = m.base().value(&[0.0; 6]).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn powerprop_unit_group_norms_leave_beta_unchanged() {
        let m = small_masked(4, MaskKind::PowerProp, 0.5);
        // each of the 3 groups has 2 coordinates; set each to (1/sqrt2, 1/sqrt2)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let beta = gv(&m, vec![s; 6]);
        let u = m.effective_coefficients(None, &beta).unwrap();
        for (a, b) in u.values().iter().zip(beta.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_identity_mask_adds_group_count() {
        let m = small_masked(5, MaskKind::L1, 1.3);
        let mut r = rng::seeded(6);
        let beta = gv(&m, rng::normal_vec(&mut r, 6));
        let t = m.partition().num_groups();
        let w = vec![1.0; t];
        let got = m.masked_value(Some(&w), &beta).unwrap();
        let bsq: f64 = beta.values().iter().map(|b| b * b).sum();
        let want = m.base().value(beta.values()).unwrap() + 1.3 * (t as f64 + bsq);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn l1_group_scaling_example() {
        // w = (2, 0), beta = ones, groups {0,1} and {2,3}: u = (2, 2, 0, 0)
        let inst = synth::random_regression(7, 8, 4, 2, 1, 0.05);
        let m = MaskedObjective::new(Arc::new(inst.objective), MaskKind::L1, 1.0).unwrap();
        let beta = gv(&m, vec![1.0; 4]);
        let u = m.effective_coefficients(Some(&[2.0, 0.0]), &beta).unwrap();
        assert_eq!(u.values(), &[2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn mask_shape_mismatches_error() {
        let m = small_masked(8, MaskKind::Softmax, 1.0);
        let beta = gv(&m, vec![0.0; 6]);
        assert!(m.masked_value(None, &beta).is_err());
        assert!(m.masked_value(Some(&[0.0; 2]), &beta).is_err());
        let mp = small_masked(9, MaskKind::PowerProp, 1.0);
        let beta = gv(&mp, vec![0.0; 6]);
        assert!(mp.masked_value(Some(&[0.0; 3]), &beta).is_err());
    }

    #[test]
    fn masked_gradients_match_finite_differences() {
        for (seed, kind) in [
            (11u64, MaskKind::Softmax),
            (12, MaskKind::L1),
            (13, MaskKind::PowerProp),
        ] {
            let m = small_masked(seed, kind, 0.4);
            let f = MaskedSmooth {
                masked: &m,
                include_w_l1: true,
            };
            let mut r = rng::seeded(seed + 50);
            for probe in 0..8 {
                // keep w away from the |w| kink for the l1 family
                let mut x = rng::normal_vec(&mut r, f.dim());
                if kind == MaskKind::L1 {
                    for xi in x.iter_mut().take(m.partition().num_groups()) {
                        if xi.abs() < 0.2 {
                            *xi += 0.3 * xi.signum();
                        }
                    }
                }
                let g = f.gradient(&x).unwrap();
                let fd = central_difference_gradient(&f, &x, 1e-6).unwrap();
                let err = gradient_rel_error(&g, &fd);
                assert!(err <= 1e-5, "{kind:?} probe {probe}: rel err {err}");
            }
        }
    }

    #[test]
    fn powerprop_gradient_vanishes_at_zero_group() {
        let m = small_masked(14, MaskKind::PowerProp, 0.5);
        let beta = gv(&m, vec![0.0; 6]);
        let (gw, gb) = m.masked_gradient(None, &beta).unwrap();
        assert!(gw.is_none());
        assert!(gb.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn l1_grad_beta_at_zero_mask_is_pure_ridge() {
        let m = small_masked(15, MaskKind::L1, 0.8);
        let mut r = rng::seeded(16);
        let beta = gv(&m, rng::normal_vec(&mut r, 6));
        let w = vec![0.0; m.partition().num_groups()];
        let (_, gb) = m.masked_gradient(Some(&w), &beta).unwrap();
        for (g, b) in gb.iter().zip(beta.values()) {
            assert!((g - 2.0 * 0.8 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_penalty_coefficient_matches_scalar_minimization_oracle() {
        // min_{w>0} w + a^2/w^2 attained at w = 2^(1/3) a^(2/3) with value
        // (3/2) 2^(1/3) a^(2/3); cross-check by golden-section search
        let a = 1.37;
        let f = |w: f64| w + a * a / (w * w);
        let (mut lo, mut hi) = (1e-6, 10.0);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let p = hi - phi * (hi - lo);
            let q = lo + phi * (hi - lo);
            if f(p) < f(q) {
                hi = q;
            } else {
                lo = p;
            }
        }
        let w_star = 0.5 * (lo + hi);
        assert!((w_star - 2f64.powf(1.0 / 3.0) * a.powf(2.0 / 3.0)).abs() < 1e-6);
        let val = f(w_star);
        let coeff = l1_mask_penalty_coefficient();
        assert!((val - coeff * a.powf(2.0 / 3.0)).abs() < 1e-9);
        assert!((coeff - 1.889_881_574_842_309_7).abs() < 1e-13);
    }

    #[test]
    fn equivalent_value_at_zero_is_loss_at_zero() {
        for kind in [MaskKind::Softmax, MaskKind::L1, MaskKind::PowerProp] {
            let m = small_masked(17, kind, 0.9);
            let u = gv(&m, vec![0.0; 6]);
            let got = m.equivalent_regularized_value(&u).unwrap();
            let want = m.base().value(&[0.0; 6]).unwrap();
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn powerprop_single_group_penalty_is_lambda_times_norm() {
        let inst = synth::random_regression(18, 8, 5, 1, 1, 0.05);
        let m = MaskedObjective::new(Arc::new(inst.objective), MaskKind::PowerProp, 2.0).unwrap();
        let mut vals = vec![0.0; 5];
        vals[0] = 3.0;
        vals[1] = 4.0;
        let u = gv(&m, vals);
        let got = m.equivalent_regularized_value(&u).unwrap();
        let want = m.base().value(u.values()).unwrap() + 2.0 * 5.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn lift_attains_equivalent_value_exactly() {
        for kind in [MaskKind::Softmax, MaskKind::L1, MaskKind::PowerProp] {
            let m = small_masked(19, kind, 0.6);
            let mut r = rng::seeded(20);
            let u = gv(&m, rng::normal_vec(&mut r, 6));
            let (w, beta) = m.lift(&u).unwrap();
            // the lifted pair reproduces u
            let u_back = m.effective_coefficients(w.as_deref(), &beta).unwrap();
            for (a, b) in u_back.values().iter().zip(u.values()) {
                assert!((a - b).abs() < 1e-9, "{kind:?}");
            }
            let masked = m.masked_value(w.as_deref(), &beta).unwrap();
            let equiv = m.equivalent_regularized_value(&u).unwrap();
            assert!(
                (masked - equiv).abs() <= 1e-9 * equiv.abs().max(1.0),
                "{kind:?}: masked {masked} vs equivalent {equiv}"
            );
        }
    }

    #[test]
    fn per_point_inequality_masked_dominates_equivalent() {
        // for every (w, beta): masked value >= equivalent value at the induced u
        for kind in [MaskKind::Softmax, MaskKind::L1, MaskKind::PowerProp] {
            let m = small_masked(21, kind, 0.75);
            let mut r = rng::seeded(22);
            for _ in 0..40 {
                let beta = gv(&m, rng::normal_vec(&mut r, 6));
                let w = kind
                    .has_mask_vector()
                    .then(|| rng::normal_vec(&mut r, m.partition().num_groups()));
                let u = m.effective_coefficients(w.as_deref(), &beta).unwrap();
                let masked = m.masked_value(w.as_deref(), &beta).unwrap();
                let equiv = m.equivalent_regularized_value(&u).unwrap();
                assert!(
                    masked >= equiv - 1e-10,
                    "{kind:?}: masked {masked} < equivalent {equiv}"
                );
            }
        }
    }

    #[test]
    fn powerprop_masked_value_equals_equivalent_always() {
        // |u|_Ti| = |beta|_Ti|^2 makes the powerprop equivalence exact pointwise
        let m = small_masked(23, MaskKind::PowerProp, 1.1);
        let mut r = rng::seeded(24);
        for _ in 0..20 {
            let beta = gv(&m, rng::normal_vec(&mut r, 6));
            let u = m.effective_coefficients(None, &beta).unwrap();
            for (nu, nb) in u.group_norms().iter().zip(beta.group_norms()) {
                assert!((nu - nb * nb).abs() < 1e-10);
            }
            let masked = m.masked_value(None, &beta).unwrap();
            let equiv = m.equivalent_regularized_value(&u).unwrap();
            assert!((masked - equiv).abs() <= 1e-10 * equiv.abs().max(1.0));
        }
    }

    #[test]
    fn serde_mask_kinds() {
        assert_eq!(
            serde_json::from_str::<MaskKind>(r#""softmax""#).unwrap(),
            MaskKind::Softmax
        );
        assert_eq!(
            serde_json::from_str::<MaskKind>(r#""l1""#).unwrap(),
            MaskKind::L1
        );
        assert_eq!(
            serde_json::from_str::<MaskKind>(r#""powerprop""#).unwrap(),
            MaskKind::PowerProp
        );
    }
}
