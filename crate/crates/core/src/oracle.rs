//! Brute-force ground truth for small instances: exhaustive support
//! enumeration, global-minimum probing for penalized objectives, and
//! empirical restricted strong convexity/smoothness estimation.
//!
//! Derived expected values elsewhere in the crate are produced by this module
//! (or by stated closed forms) before the main solvers are trusted; nothing
//! here depends on the reweighting path it cross-checks.

use crate::error::{Error, Result};
use crate::groups::GroupVector;
use crate::linalg::norm2;
use crate::objectives::{ConvexObjective, SmoothFn};
use crate::rng;
use crate::solvers::{solve_smooth, GroupPenalty, RestrictedSmooth, SolverConfig};

/// Enumeration budget for [`best_support`]: total restricted solves.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Best objective over supports of bounded group sparsity.
#[derive(Debug, Clone)]
pub struct BestSupport {
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub objective: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All subsets of `[0, t)` of size exactly `k`, lexicographic order.
fn for_each_subset<Fv: FnMut(&[usize]) -> Result<()>>(t: usize, k: usize, mut f: Fv) -> Result<()> {
    if k == 0 {
        return f(&[]);
    }
    if k > t {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx)?;
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if idx[i] != i + t - k {
                break;
            }
            if i == 0 {
                return Ok(());
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimize the loss restricted to every support of group sparsity at most
/// `s` and return the best (ties to the earliest support in enumeration
/// order: by size, then lexicographic).
pub fn best_support(
    obj: &dyn ConvexObjective,
    s: usize,
    inner: &SolverConfig,
) -> Result<BestSupport> {
    let partition = obj.partition().clone();
    let t = partition.num_groups();
    let s = s.min(t);
    let required: u128 = (0..=s).map(|k| binomial(t, k)).sum();
    if required > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            required,
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut best: Option<BestSupport> = None;
    for k in 0..=s {
        for_each_subset(t, k, |support| {
            let coords: Vec<usize> = support
                .iter()
                .flat_map(|&g| partition.group(g).iter().copied())
                .collect();
            let (beta, objective) = if coords.is_empty() {
                let zero = vec![0.0; obj.n()];
                let v = obj.value(&zero)?;
                (zero, v)
            } else {
                let restricted = RestrictedSmooth::zero_based(obj, coords)?;
                let res = solve_smooth(&restricted, &vec![0.0; restricted.dim()], inner)?;
                (restricted.expand(&res.x), res.objective)
            };
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(BestSupport {
                    support: support.to_vec(),
                    beta,
                    objective,
                });
            }
            Ok(())
        })?;
    }
    Ok(best.expect("enumeration visits at least the empty support"))
}

/// Probe-cloud settings for [`verify_global_min`].
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    /// Points per axis for the dense grid (skipped when the grid would
    /// exceed ~2e6 points).
    pub axis_points: usize,
    /// Number of random Gaussian probes (drawn at three scales).
    pub random_probes: usize,
    /// Base scale of probes and grid extents.
    pub scale: f64,
    pub seed: u64,
    /// Polish the best probes (and the candidate) by compass search.
    pub refine: bool,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            axis_points: 7,
            random_probes: 300,
            scale: 2.0,
            seed: 0,
            refine: true,
        }
    }
}

/// Outcome of the probe-based verification: never asserts, only reports.
#[derive(Debug, Clone)]
pub struct Verification {
    pub verified: bool,
    /// Worst violation: candidate objective minus best probe objective,
    /// floored at zero.
    pub gap: f64,
    pub candidate_objective: f64,
    pub best_probe_objective: f64,
}

/// Derivative-free compass search on `f` (used to polish probes; evaluation
/// only, independent of any gradient or solver path).
fn compass_search<Fv: Fn(&[f64]) -> Result<f64>>(
    f: &Fv,
    x0: &[f64],
    step0: f64,
    budget: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut step = step0;
    let mut evals = 0;
    while step > 1e-9 && evals < budget {
        let mut improved = false;
        'coords: for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + dir * step;
                let fc = f(&x)?;
                evals += 1;
                if fc < fx {
                    fx = fc;
                    improved = true;
                    break 'coords;
                }
                x[i] = old;
                if evals >= budget {
                    break 'coords;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((x, fx))
}

/// Check whether `candidate` attains the global minimum of
/// `L(x) + penalty(group norms of x)` up to 1e-8, by evaluating the objective
/// over a probe cloud: per-support restricted loss minimizers, an axis grid,
/// random Gaussian probes, and compass-refined versions of the best of them.
pub fn verify_global_min(
    obj: &dyn ConvexObjective,
    penalty: &dyn GroupPenalty,
    candidate: &[f64],
    spec: &ProbeSpec,
) -> Result<Verification> {
    let partition = obj.partition().clone();
    let n = obj.n();
    if candidate.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: candidate.len(),
        });
    }
    let total = |x: &[f64]| -> Result<f64> {
        let norms = partition.group_norms_of(x)?;
        Ok(obj.value(x)? + penalty.value_of_norms(&norms)?)
    };

    let mut probes: Vec<Vec<f64>> = vec![vec![0.0; n], candidate.to_vec()];

    // restricted loss minimizers over all supports (cheap for small t), each
    // with its shrinkage ray: penalized minimizers sit between the origin and
    // the unpenalized restricted fit, so pure endpoints miss them
    let t = partition.num_groups();
    let inner = SolverConfig {
        grad_tol: 1e-10,
        ..SolverConfig::default()
    };
    let enumerable = (0..=t).map(|k| binomial(t, k)).sum::<u128>() <= 4096;
    if enumerable {
        for k in 0..=t {
            for_each_subset(t, k, |support| {
                let coords: Vec<usize> = support
                    .iter()
                    .flat_map(|&g| partition.group(g).iter().copied())
                    .collect();
                if !coords.is_empty() {
                    let restricted = RestrictedSmooth::zero_based(obj, coords)?;
                    let res = solve_smooth(&restricted, &vec![0.0; restricted.dim()], &inner)?;
                    let full = restricted.expand(&res.x);
                    for step in 1..=20 {
                        let c = step as f64 / 20.0;
                        probes.push(full.iter().map(|v| c * v).collect());
                    }
                }
                Ok(())
            })?;
        }
    }

    // dense axis grid when affordable
    let r = spec.axis_points.max(2);
    if (r as f64).powi(n as i32) <= 2e6 {
        let mut point = vec![0.0; n];
        let mut counter = vec![0usize; n];
        loop {
            for i in 0..n {
                let frac = counter[i] as f64 / (r - 1) as f64;
                point[i] = -spec.scale + 2.0 * spec.scale * frac;
            }
            probes.push(point.clone());
            let mut i = 0;
            loop {
                if i == n {
                    break;
                }
                counter[i] += 1;
                if counter[i] < r {
                    break;
                }
                counter[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }

    // random probes at three scales
    let mut rr = rng::split(spec.seed, 0x0b5e);
    for k in 0..spec.random_probes {
        let scale = spec.scale * [0.3, 1.0, 3.0][k % 3];
        let p: Vec<f64> = (0..n).map(|_| scale * rng::normal(&mut rr)).collect();
        probes.push(p);
    }

    let cand_val = total(candidate)?;
    let mut best_val = f64::INFINITY;
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(probes.len());
    for (i, p) in probes.iter().enumerate() {
        let v = total(p)?;
        scored.push((v, i));
        if v < best_val {
            best_val = v;
        }
    }

    if spec.refine {
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(_, idx) in scored.iter().take(8) {
            let (_, fv) = compass_search(&total, &probes[idx], 0.25 * spec.scale, 4000)?;
            if fv < best_val {
                best_val = fv;
            }
        }
    }

    let gap = (cand_val - best_val).max(0.0);
    Ok(Verification {
        verified: cand_val <= best_val + 1e-8,
        gap,
        candidate_objective: cand_val,
        best_probe_objective: best_val,
    })
}

/// Empirical restricted strong convexity / smoothness bounds.
#[derive(Debug, Clone)]
pub struct RscEstimate {
    /// Lower curvature estimate at the requested group sparsity.
    pub mu: f64,
    /// Upper curvature estimate.
    pub smoothness: f64,
    pub sparsity: usize,
    pub samples: usize,
}

/// Sample Bregman curvature ratios `2 (L(b + d) - L(b) - <grad L(b), d>) /
/// |d|^2` over random base points and random directions of group sparsity up
/// to `s`; the minimum estimates the restricted strong convexity constant and
/// the maximum the restricted smoothness constant.
///
/// Directions are drawn at every sparsity level `1..=s` from per-level
/// streams, so the sample set for `s + 1` contains the set for `s` and the
/// estimates are monotone in `s` by construction.
pub fn estimate_rsc(
    obj: &dyn ConvexObjective,
    s: usize,
    samples: usize,
    seed: u64,
) -> Result<RscEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let partition = obj.partition().clone();
    let t = partition.num_groups();
    let s = s.min(t).max(1);
    let n = obj.n();
    let mut mu = f64::INFINITY;
    let mut smoothness = f64::NEG_INFINITY;
    let mut counted = 0;
    for level in 1..=s {
        let mut r = rng::split(seed, 0x5c40 + level as u64);
        for _ in 0..samples {
            let base_scale = [0.5, 1.0, 2.0][rng::index(&mut r, 3)];
            let beta: Vec<f64> = (0..n).map(|_| base_scale * rng::normal(&mut r)).collect();
            // random support of `level` distinct groups
            let mut order: Vec<usize> = (0..t).collect();
            for i in (1..t).rev() {
                let j = rng::index(&mut r, i + 1);
                order.swap(i, j);
            }
            let mut delta = vec![0.0; n];
            for &g in order.iter().take(level) {
                for &i in partition.group(g) {
                    delta[i] = rng::normal(&mut r);
                }
            }
            let dir_norm = norm2(&delta);
            if dir_norm < 1e-12 {
                continue;
            }
            // unit direction at scales in [0.1, 1]: smaller steps lose the
            // Bregman numerator to cancellation
            let dscale = 10f64.powf(rng::uniform(&mut r, -1.0, 0.0));
            for d in delta.iter_mut() {
                *d *= dscale / dir_norm;
            }
            let dsq: f64 = delta.iter().map(|d| d * d).sum();
            let shifted: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + d).collect();
            let g = obj.gradient(&beta)?;
            let inner: f64 = g.iter().zip(&delta).map(|(gi, di)| gi * di).sum();
            let ratio = 2.0 * (obj.value(&shifted)? - obj.value(&beta)? - inner) / dsq;
            mu = mu.min(ratio);
            smoothness = smoothness.max(ratio);
            counted += 1;
        }
    }
    Ok(RscEstimate {
        mu,
        smoothness,
        sparsity: s,
        samples: counted,
    })
}

/// Convenience: the penalized objective value used by the verifier.
pub fn penalized_value(
    obj: &dyn ConvexObjective,
    penalty: &dyn GroupPenalty,
    x: &[f64],
) -> Result<f64> {
    let norms = obj.partition().group_norms_of(x)?;
    Ok(obj.value(x)? + penalty.value_of_norms(&norms)?)
}

/// Distance helper used by uniqueness checks.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d)
}

/// Group sparsity of a raw slice under an objective's partition.
pub fn sparsity_of(obj: &dyn ConvexObjective, x: &[f64], tol: f64) -> Result<usize> {
    Ok(GroupVector::new(obj.partition().clone(), x.to_vec())?.group_sparsity(tol))
}
