//! Numerical minimization: proximal gradient for group LASSO, reweighted
//! (majorize-minimize) group LASSO for nonconvex group penalties, and plain
//! gradient descent with Armijo backtracking for smooth problems.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::{dot, norm2};
use crate::objectives::{ConvexObjective, SmoothFn};
use crate::regularizers::{block_soft_threshold, CompositeRegularizer};
use crate::rng;

/// Shared solver knobs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub seed: u64,
    /// Record per-iteration objective values in the result.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-8,
            step_init: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            seed: 0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.step_init > 0.0) {
            return Err(Error::InvalidArgument(
                "grad_tol and step_init must be positive".into(),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument(
                "backtrack_factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidArgument("armijo_c must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One recorded iteration: the objective and the gradient norm (smooth
/// solves) or prox fixed-point residual (composite solves).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub objective: f64,
    pub grad_norm: f64,
}

/// Outcome of a solve. For the group solvers `x` is the coefficient vector
/// over the objective's partition; `grad_norm_final` is the gradient norm for
/// smooth problems and the prox fixed-point residual for composite ones.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm_final: f64,
    pub trace: Option<Vec<TracePoint>>,
}

impl SolveResult {
    pub fn group_vector(&self, partition: Arc<GroupPartition>) -> Result<crate::GroupVector> {
        crate::GroupVector::new(partition, self.x.clone())
    }
}

fn ensure_finite(v: f64, iteration: usize, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Diverged {
            iteration,
            detail: format!("{what} became {v}"),
        })
    }
}

/// Gradient descent with Armijo backtracking; monotone non-increasing
/// objective, stops when the gradient norm falls below `grad_tol`.
pub fn solve_smooth<F: SmoothFn + ?Sized>(
    f: &F,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut fx = ensure_finite(f.value(&x)?, 0, "objective")?;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut t_start = cfg.step_init;
    for iter in 0..cfg.max_iters {
        let g = f.gradient(&x)?;
        grad_norm = norm2(&g);
        ensure_finite(grad_norm, iter, "gradient norm")?;
        if grad_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        iterations = iter + 1;
        let mut t = t_start;
        let gsq = grad_norm * grad_norm;
        loop {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let fc = f.value(&cand)?;
            if fc.is_finite() && fc <= fx - cfg.armijo_c * t * gsq {
                x = cand;
                fx = fc;
                // warm-start the next line search just above the accepted step
                t_start = (t / cfg.backtrack_factor).min(cfg.step_init);
                break;
            }
            t *= cfg.backtrack_factor;
            if t < 1e-18 {
                // step collapsed; accept no move and let the outer loop stop
                converged = grad_norm <= cfg.grad_tol;
                break;
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TracePoint {
                objective: fx,
                grad_norm,
            });
        }
        if t_collapsed(t) {
            break;
        }
    }
    Ok(SolveResult {
        x,
        objective: fx,
        iterations,
        converged,
        grad_norm_final: grad_norm,
        trace,
    })
}

fn t_collapsed(t: f64) -> bool {
    t < 1e-18
}

/// One proximal block: the coordinates of a group together with its
/// group-l2 penalty weight. Coordinates not covered by any block are left
/// unpenalized by the prox step.
#[derive(Debug, Clone)]
pub struct ProxGroup {
    pub indices: Vec<usize>,
    pub weight: f64,
}

fn apply_prox(z: &[f64], prox_groups: &[ProxGroup], t: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    let mut buf = Vec::new();
    for pg in prox_groups {
        buf.clear();
        buf.extend(pg.indices.iter().map(|&i| z[i]));
        let shrunk = block_soft_threshold(&buf, t * pg.weight);
        for (&i, &v) in pg.indices.iter().zip(&shrunk) {
            out[i] = v;
        }
    }
    out
}

fn penalty_value(x: &[f64], prox_groups: &[ProxGroup]) -> f64 {
    prox_groups
        .iter()
        .map(|pg| pg.weight * pg.indices.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
        .sum()
}

/// Proximal gradient with backtracking for `f(x) + sum_g w_g |x|_g|_2`.
/// The result's objective is the composite value; convergence means the prox
/// fixed-point residual `|x - prox(x - t grad f(x))|` fell below `grad_tol`.
pub fn solve_proximal<F: SmoothFn + ?Sized>(
    f: &F,
    prox_groups: &[ProxGroup],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    for pg in prox_groups {
        if pg.weight < 0.0 {
            return Err(Error::InvalidArgument(
                "prox weights must be nonnegative".into(),
            ));
        }
        if let Some(&bad) = pg.indices.iter().find(|&&i| i >= f.dim()) {
            return Err(Error::InvalidArgument(format!(
                "prox group index {bad} out of range"
            )));
        }
    }
    let mut x = x0.to_vec();
    let mut fx = ensure_finite(f.value(&x)?, 0, "objective")?;
    let mut composite = fx + penalty_value(&x, prox_groups);
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut t_start = cfg.step_init;
    for iter in 0..cfg.max_iters {
        let g = f.gradient(&x)?;
        ensure_finite(norm2(&g), iter, "gradient norm")?;
        let mut t = t_start;
        let mut accepted = false;
        while t >= 1e-18 {
            let z: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let cand = apply_prox(&z, prox_groups, t);
            let delta: Vec<f64> = cand.iter().zip(&x).map(|(c, xi)| c - xi).collect();
            let fc = f.value(&cand)?;
            // strict sufficient decrease: any epsilon slack here lets the
            // iterates settle into a limit cycle above the residual target
            let quad = fx + dot(&g, &delta) + dot(&delta, &delta) / (2.0 * t);
            if fc.is_finite() && fc <= quad {
                residual = norm2(&delta);
                t_start = (t / cfg.backtrack_factor).min(cfg.step_init);
                x = cand;
                fx = fc;
                composite = fx + penalty_value(&x, prox_groups);
                ensure_finite(composite, iter, "objective")?;
                accepted = true;
                break;
            }
            t *= cfg.backtrack_factor;
        }
        if !accepted {
            // step collapsed at float resolution: the last accepted move is
            // the best fixed-point residual this arithmetic can certify
            converged = residual <= cfg.grad_tol;
            break;
        }
        iterations = iter + 1;
        if let Some(tr) = trace.as_mut() {
            tr.push(TracePoint {
                objective: composite,
                grad_norm: residual,
            });
        }
        if residual <= cfg.grad_tol {
            converged = true;
            break;
        }
    }
    Ok(SolveResult {
        x,
        objective: composite,
        iterations,
        converged,
        grad_norm_final: residual,
        trace,
    })
}

/// Group LASSO `L(beta) + lambda * sum_i |beta|_Ti|_2` by proximal gradient
/// from the zero vector.
pub fn solve_group_lasso(
    obj: &dyn ConvexObjective,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "group LASSO needs lambda > 0, got {lambda}"
        )));
    }
    if !obj.strictly_convex() {
        return Err(Error::InvalidArgument(
            "objective must be strictly convex (set a positive ridge)".into(),
        ));
    }
    let weights = vec![lambda; obj.partition().num_groups()];
    solve_weighted_group_lasso(obj, &weights, &vec![0.0; obj.n()], cfg)
}

/// Group LASSO with one penalty weight per group (weight zero leaves a group
/// unpenalized). Used directly by the reweighting loop and the OMPR selection
/// subproblems.
pub fn solve_weighted_group_lasso(
    obj: &dyn ConvexObjective,
    weights: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let partition = obj.partition();
    if weights.len() != partition.num_groups() {
        return Err(Error::DimensionMismatch {
            expected: partition.num_groups(),
            got: weights.len(),
        });
    }
    let prox_groups: Vec<ProxGroup> = partition
        .groups()
        .iter()
        .zip(weights)
        .map(|(g, &w)| ProxGroup {
            indices: g.clone(),
            weight: w,
        })
        .collect();
    solve_proximal(obj, &prox_groups, x0, cfg)
}

/// A group penalty usable by the majorize-minimize loop: a value on group
/// norms plus the per-group linearization weights at the current norms.
pub trait GroupPenalty {
    fn partition(&self) -> &Arc<GroupPartition>;
    fn value_of_norms(&self, norms: &[f64]) -> Result<f64>;
    fn mm_weights(&self, norms: &[f64]) -> Result<Vec<f64>>;

    /// Weights of a convex group-LASSO surrogate used as a warm-start
    /// restart; defaults to the linearization at unit norms.
    fn warm_weights(&self) -> Result<Vec<f64>> {
        self.mm_weights(&vec![1.0; self.partition().num_groups()])
    }
}

impl GroupPenalty for CompositeRegularizer {
    fn partition(&self) -> &Arc<GroupPartition> {
        CompositeRegularizer::partition(self)
    }

    fn value_of_norms(&self, norms: &[f64]) -> Result<f64> {
        CompositeRegularizer::value_of_norms(self, norms)
    }

    fn mm_weights(&self, norms: &[f64]) -> Result<Vec<f64>> {
        CompositeRegularizer::mm_weights(self, norms)
    }

    /// At any one-group-sparse point the composite's derivative in the active
    /// norm is exactly lambda, so the uniform-lambda group LASSO is the right
    /// convex surrogate.
    fn warm_weights(&self) -> Result<Vec<f64>> {
        Ok(vec![self.lambda(); self.partition().num_groups()])
    }
}

/// Minimize `L(beta) + penalty(group norms of beta)` by iteratively
/// reweighted group LASSO with multiple restarts; the best iterate over all
/// restarts (by the exact penalized objective) wins. Restarts are
/// seed-deterministic. The outer loop stops when the objective decrease falls
/// below `grad_tol`, and abandons a restart whose objective fails to decrease
/// (the linearization is not a majorizer for penalties that are convex near
/// the origin, so monotonicity is not guaranteed there).
pub fn solve_penalized(
    obj: &dyn ConvexObjective,
    penalty: &dyn GroupPenalty,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if !obj.strictly_convex() {
        return Err(Error::InvalidArgument(
            "objective must be strictly convex (set a positive ridge)".into(),
        ));
    }
    let partition = obj.partition();
    if !Arc::ptr_eq(partition, penalty.partition()) && partition != penalty.partition() {
        return Err(Error::InvalidArgument(
            "objective and penalty use different partitions".into(),
        ));
    }
    let n = obj.n();
    let eval = |x: &[f64]| -> Result<f64> {
        let norms = partition.group_norms_of(x)?;
        Ok(obj.value(x)? + penalty.value_of_norms(&norms)?)
    };

    const NUM_RESTARTS: usize = 4;
    const MAX_OUTER: usize = 60;

    // restart 0: the zero vector; restart 1: the convex-surrogate group
    // LASSO warm start; restarts 2..: random points
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; n]];
    {
        let w1 = penalty.warm_weights()?;
        let warm = solve_weighted_group_lasso(obj, &w1, &vec![0.0; n], cfg)?;
        starts.push(warm.x);
    }
    let mut r = rng::split(cfg.seed, 0x9f07);
    while starts.len() < NUM_RESTARTS {
        starts.push(rng::normal_vec(&mut r, n));
    }

    let mut best_x = vec![0.0; n];
    let mut best_val = f64::INFINITY;
    let mut best_res: Option<SolveResult> = None;
    let mut trace = cfg.record_trace.then(Vec::new);
    for start in starts {
        let mut x = start;
        let mut current = ensure_finite(eval(&x)?, 0, "objective")?;
        if current < best_val {
            best_val = current;
            best_x = x.clone();
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TracePoint {
                objective: current,
                grad_norm: f64::NAN,
            });
        }
        let mut last_inner: Option<SolveResult> = None;
        for _outer in 0..MAX_OUTER {
            let norms = partition.group_norms_of(&x)?;
            let weights = penalty.mm_weights(&norms)?;
            let inner = solve_weighted_group_lasso(obj, &weights, &x, cfg)?;
            let cand_val = ensure_finite(eval(&inner.x)?, inner.iterations, "objective")?;
            if let Some(tr) = trace.as_mut() {
                tr.push(TracePoint {
                    objective: cand_val,
                    grad_norm: inner.grad_norm_final,
                });
            }
            let improved = cand_val < current - 1e-14 * current.abs().max(1.0);
            if cand_val < best_val {
                best_val = cand_val;
                best_x = inner.x.clone();
                best_res = Some(inner.clone());
            }
            let decrease = current - cand_val;
            x = inner.x.clone();
            last_inner = Some(inner);
            if !improved {
                break; // non-decreasing outer step: abandon this restart
            }
            current = cand_val;
            if decrease < cfg.grad_tol {
                break;
            }
        }
        if best_res.is_none() {
            best_res = last_inner;
        }
    }
    let (converged, grad_norm_final, iterations) = match &best_res {
        Some(r) => (r.converged, r.grad_norm_final, r.iterations),
        None => (true, 0.0, 0),
    };
    Ok(SolveResult {
        x: best_x,
        objective: best_val,
        iterations,
        converged,
        grad_norm_final,
        trace,
    })
}

/// Minimize the q-regularized objective `L(beta) + lambda * q_inv(sum_i
/// q(|beta|_Ti|_2))` (reweighted group LASSO with restarts). With the
/// absolute-value q this solves the plain group LASSO problem.
pub fn solve_q_regularized(
    obj: &dyn ConvexObjective,
    reg: &CompositeRegularizer,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_penalized(obj, reg, cfg)
}

/// Max violation of the group LASSO optimality conditions at `beta` with
/// per-group weights: active groups need `grad L|_Ti = -w_i beta|_Ti /
/// |beta|_Ti|`, inactive groups need `|grad L|_Ti| <= w_i`.
pub fn group_lasso_kkt_violation(
    obj: &dyn ConvexObjective,
    weights: &[f64],
    beta: &[f64],
    active_tol: f64,
) -> Result<f64> {
    let g = obj.gradient(beta)?;
    let partition = obj.partition();
    let mut worst = 0.0f64;
    for (gi, group) in partition.groups().iter().enumerate() {
        let w = weights[gi];
        let bnorm = group.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt();
        if bnorm > active_tol {
            for &i in group {
                let expect = -w * beta[i] / bnorm;
                worst = worst.max((g[i] - expect).abs());
            }
        } else {
            let gnorm = group.iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt();
            worst = worst.max((gnorm - w).max(0.0));
        }
    }
    Ok(worst)
}

/// View of a smooth function on a subset of its coordinates; the remaining
/// coordinates are pinned to the values in `base_point`.
pub struct RestrictedSmooth<'a> {
    f: &'a dyn SmoothFn,
    coords: Vec<usize>,
    base_point: Vec<f64>,
}

impl<'a> RestrictedSmooth<'a> {
    pub fn new(f: &'a dyn SmoothFn, coords: Vec<usize>, base_point: Vec<f64>) -> Result<Self> {
        if base_point.len() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: base_point.len(),
            });
        }
        if let Some(&bad) = coords.iter().find(|&&c| c >= f.dim()) {
            return Err(Error::InvalidArgument(format!(
                "restricted coordinate {bad} out of range"
            )));
        }
        Ok(Self {
            f,
            coords,
            base_point,
        })
    }

    /// Zero base point: coordinates off the subset are held at zero.
    pub fn zero_based(f: &'a dyn SmoothFn, coords: Vec<usize>) -> Result<Self> {
        let base = vec![0.0; f.dim()];
        Self::new(f, coords, base)
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = self.base_point.clone();
        for (&c, &v) in self.coords.iter().zip(reduced) {
            full[c] = v;
        }
        full
    }

    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|&c| full[c]).collect()
    }
}

impl SmoothFn for RestrictedSmooth<'_> {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.f.value(&self.expand(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.f.gradient(&self.expand(x))?;
        Ok(self.reduce(&g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{tau_threshold, LeastSquaresObjective};
    use crate::regularizers::QFunction;
    use crate::synth;
    use ndarray::Array2;

    struct Quadratic {
        center: Vec<f64>,
    }

    impl SmoothFn for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok(0.5
                * x.iter()
                    .zip(&self.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>())
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().zip(&self.center).map(|(a, b)| a - b).collect())
        }
    }

    #[test]
    fn smooth_quadratic_reaches_center() {
        let f = Quadratic {
            center: vec![1.0, -2.0, 0.5],
        };
        let cfg = SolverConfig::default();
        let res = solve_smooth(&f, &[10.0, 10.0, 10.0], &cfg).unwrap();
        assert!(res.converged);
        for (xi, ci) in res.x.iter().zip(&f.center) {
            assert!((xi - ci).abs() < 1e-7);
        }
    }

    #[test]
    fn smooth_at_optimum_takes_no_iterations() {
        let f = Quadratic {
            center: vec![1.0, 2.0],
        };
        let res = solve_smooth(&f, &[1.0, 2.0], &SolverConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn smooth_matches_linear_solve_on_random_spd_quadratic() {
        // f(x) = 0.5 x'Ax - b'x with A = M'M + I
        use ndarray::Array1;
        let mut r = crate::rng::seeded(5);
        let n = 6;
        let m = Array2::from_shape_fn((n, n), |_| crate::rng::normal(&mut r));
        let a = m.t().dot(&m) + Array2::<f64>::eye(n);
        let b = Array1::from_shape_fn(n, |_| crate::rng::normal(&mut r));

        struct Quad {
            a: Array2<f64>,
            b: Array1<f64>,
        }
        impl SmoothFn for Quad {
            fn dim(&self) -> usize {
                self.b.len()
            }
            fn value(&self, x: &[f64]) -> Result<f64> {
                let xv = Array1::from(x.to_vec());
                Ok(0.5 * xv.dot(&self.a.dot(&xv)) - self.b.dot(&xv))
            }
            fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
                let xv = Array1::from(x.to_vec());
                Ok((self.a.dot(&xv) - &self.b).to_vec())
            }
        }
        let f = Quad {
            a: a.clone(),
            b: b.clone(),
        };
        let res = solve_smooth(&f, &vec![0.0; n], &SolverConfig::default()).unwrap();
        let exact = crate::linalg::cholesky_solve(&a, &b).unwrap();
        for i in 0..n {
            assert!((res.x[i] - exact[i]).abs() < 1e-6, "coord {i}");
        }
    }

    #[test]
    fn group_lasso_above_tau_returns_zero() {
        let inst = synth::separable_regression(11, 8, 3, 0.01);
        let (tau, _) = tau_threshold(&inst.objective).unwrap();
        let res = solve_group_lasso(&inst.objective, 1.01 * tau, &SolverConfig::default()).unwrap();
        assert!(norm2(&res.x) <= 1e-6, "norm {}", norm2(&res.x));
    }

    #[test]
    fn group_lasso_just_below_tau_selects_argmax_group() {
        let inst = synth::separable_regression(3, 8, 3, 0.01);
        let (tau, arg) = tau_threshold(&inst.objective).unwrap();
        let res = solve_group_lasso(&inst.objective, 0.95 * tau, &SolverConfig::default()).unwrap();
        let gv = res
            .group_vector(inst.objective.partition().clone())
            .unwrap();
        assert_eq!(gv.group_sparsity(1e-8), 1);
        let norms = gv.group_norms();
        let active = crate::groups::argmax_lowest(&norms).unwrap();
        assert_eq!(active, arg);
        assert_eq!(active, inst.planted_groups[0]);
    }

    #[test]
    fn group_lasso_vanishing_lambda_matches_ridge_solution() {
        let mu = 0.25;
        let d = 4;
        let y = vec![3.0, -1.0, 0.5, 2.0];
        let x = Array2::eye(d);
        let ym = Array2::from_shape_vec((d, 1), y.clone()).unwrap();
        let p = Arc::new(GroupPartition::new(d, vec![vec![0, 1], vec![2, 3]]).unwrap());
        let obj = LeastSquaresObjective::new(x, ym, p, mu).unwrap();
        let res = solve_group_lasso(&obj, 1e-10, &SolverConfig::default()).unwrap();
        for i in 0..d {
            assert!((res.x[i] - y[i] / (1.0 + mu)).abs() < 1e-6);
        }
    }

    #[test]
    fn group_lasso_rejects_nonpositive_lambda() {
        let inst = synth::separable_regression(0, 6, 2, 0.01);
        assert!(solve_group_lasso(&inst.objective, 0.0, &SolverConfig::default()).is_err());
        assert!(solve_group_lasso(&inst.objective, -1.0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn traces_are_monotone_non_increasing() {
        let inst = synth::separable_regression(7, 8, 4, 0.05);
        let (tau, _) = tau_threshold(&inst.objective).unwrap();
        let cfg = SolverConfig {
            record_trace: true,
            ..SolverConfig::default()
        };
        let res = solve_group_lasso(&inst.objective, 0.5 * tau, &cfg).unwrap();
        let tr = res.trace.unwrap();
        for w in tr.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-10 * w[0].objective.abs().max(1.0));
        }

        let f = Quadratic {
            center: vec![2.0; 5],
        };
        let res = solve_smooth(&f, &[9.0; 5], &cfg).unwrap();
        for w in res.trace.unwrap().windows(2) {
            assert!(w[1].objective <= w[0].objective);
        }
    }

    #[test]
    fn group_lasso_kkt_conditions_hold() {
        let inst = synth::random_regression(13, 12, 8, 4, 1, 0.05);
        let (tau, _) = tau_threshold(&inst.objective).unwrap();
        let cfg = SolverConfig::default();
        for frac in [0.2, 0.5, 0.8] {
            let lambda = frac * tau;
            let res = solve_group_lasso(&inst.objective, lambda, &cfg).unwrap();
            assert!(res.converged, "lambda {lambda} did not converge");
            let weights = vec![lambda; inst.objective.partition().num_groups()];
            let viol = group_lasso_kkt_violation(&inst.objective, &weights, &res.x, 1e-7).unwrap();
            assert!(viol <= 1e-6, "lambda {lambda}: violation {viol}");
        }
    }

    #[test]
    fn q_solver_with_abs_matches_group_lasso() {
        let inst = synth::random_regression(19, 12, 9, 3, 1, 0.05);
        let (tau, _) = tau_threshold(&inst.objective).unwrap();
        let lambda = 0.4 * tau;
        let gl = solve_group_lasso(&inst.objective, lambda, &SolverConfig::default()).unwrap();
        let reg =
            CompositeRegularizer::new(QFunction::Abs, lambda, inst.objective.partition().clone())
                .unwrap();
        let qr = solve_q_regularized(&inst.objective, &reg, &SolverConfig::default()).unwrap();
        assert!(
            (gl.objective - qr.objective).abs() <= 1e-6 * gl.objective.abs().max(1.0),
            "{} vs {}",
            gl.objective,
            qr.objective
        );
    }

    #[test]
    fn q_solver_above_tau_returns_zero_for_all_kinds() {
        let inst = synth::separable_regression(23, 8, 4, 0.02);
        let (tau, _) = tau_threshold(&inst.objective).unwrap();
        for q in [
            QFunction::Abs,
            QFunction::Power { p: 0.5 },
            QFunction::Power { p: 2.0 / 3.0 },
            QFunction::LogSum { eps: 1.0 },
            QFunction::Lambert,
        ] {
            let reg = CompositeRegularizer::new(q, 1.01 * tau, inst.objective.partition().clone())
                .unwrap();
            let res = solve_q_regularized(&inst.objective, &reg, &SolverConfig::default()).unwrap();
            assert!(
                norm2(&res.x) <= 1e-6,
                "{q:?}: returned norm {}",
                norm2(&res.x)
            );
        }
    }

    #[test]
    fn q_solver_logsum_support_matches_group_lasso_on_planted_instance() {
        let inst = synth::separable_regression(29, 10, 5, 0.02);
        let (tau, _) = tau_threshold(&inst.objective).unwrap();
        let lambda = 0.95 * tau;
        let gl = solve_group_lasso(&inst.objective, lambda, &SolverConfig::default()).unwrap();
        let reg = CompositeRegularizer::new(
            QFunction::LogSum { eps: 1.0 },
            lambda,
            inst.objective.partition().clone(),
        )
        .unwrap();
        let qr = solve_q_regularized(&inst.objective, &reg, &SolverConfig::default()).unwrap();
        let p = inst.objective.partition().clone();
        let gl_support: Vec<bool> = gl
            .group_vector(p.clone())
            .unwrap()
            .group_norms()
            .iter()
            .map(|&x| x > 1e-6)
            .collect();
        let qr_support: Vec<bool> = qr
            .group_vector(p)
            .unwrap()
            .group_norms()
            .iter()
            .map(|&x| x > 1e-6)
            .collect();
        assert_eq!(gl_support, qr_support);
    }

    #[test]
    fn restricted_smooth_round_trips() {
        let f = Quadratic {
            center: vec![1.0, 2.0, 3.0, 4.0],
        };
        let r = RestrictedSmooth::zero_based(&f, vec![1, 3]).unwrap();
        assert_eq!(r.dim(), 2);
        let res = solve_smooth(&r, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        let full = r.expand(&res.x);
        assert!((full[1] - 2.0).abs() < 1e-7);
        assert!((full[3] - 4.0).abs() < 1e-7);
        assert_eq!(full[0], 0.0);
        assert_eq!(full[2], 0.0);
    }
}
