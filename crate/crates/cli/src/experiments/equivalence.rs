//! Mask-equivalence study: on each small random instance, the best-found
//! masked optimum and the best-found regularized optimum must agree. The two
//! sides cross-seed each other (effective coefficients one way, the optimal
//! lift the other), and the regularized minimizer is probe-verified.

use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use groupprune::groups::GroupVector;
use groupprune::oracle::{verify_global_min, ProbeSpec};
use groupprune::reparam::{solve_masked, split_masked_solution, MaskKind, MaskedObjective};
use groupprune::rng;
use groupprune::solvers::{solve_penalized, SolverConfig};
use groupprune::synth;

use crate::config::EquivalenceConfig;
use crate::experiments::{to_runtime, ExperimentOutput, TraceFile};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRow {
    pub seed: u64,
    pub instance: usize,
    pub mask_kind: String,
    pub masked_optimum: f64,
    pub regularized_optimum: f64,
    pub rel_gap: f64,
    pub oracle_verified: bool,
}

pub const MASK_KINDS: [(MaskKind, &str); 3] = [
    (MaskKind::Softmax, "softmax"),
    (MaskKind::L1, "l1"),
    (MaskKind::PowerProp, "powerprop"),
];

/// Best-found optima on both sides of one instance, with cross-seeding.
pub fn equivalence_gap(
    masked: &MaskedObjective,
    restarts: usize,
    seed: u64,
) -> Result<(f64, f64, Vec<f64>), groupprune::Error> {
    let n = masked.partition().n();
    let t = masked.partition().num_groups();
    let scfg = SolverConfig {
        max_iters: 20_000,
        grad_tol: 1e-9,
        seed,
        ..SolverConfig::default()
    };

    let mut best_masked = f64::INFINITY;
    let mut best_masked_x: Vec<f64> = Vec::new();
    let mut r = rng::split(seed, 0xe9);
    for restart in 0..restarts.max(1) {
        let (w0, b0) = if restart == 0 {
            (
                masked.kind().has_mask_vector().then(|| vec![0.0; t]),
                vec![0.0; n],
            )
        } else {
            (
                masked
                    .kind()
                    .has_mask_vector()
                    .then(|| rng::normal_vec(&mut r, t).iter().map(|v| 0.7 * v).collect()),
                rng::normal_vec(&mut r, n).iter().map(|v| 0.7 * v).collect(),
            )
        };
        let res = solve_masked(masked, w0.as_deref(), &b0, &scfg)?;
        if res.objective < best_masked {
            best_masked = res.objective;
            best_masked_x = res.x;
        }
    }

    // regularized side by reweighted solves
    let penalty = masked.equivalent_penalty();
    let u_res = solve_penalized(masked.base().as_ref(), &penalty, &scfg)?;
    let mut best_u = u_res.objective;
    let mut best_u_x = u_res.x;

    // cross-seed: masked optimum -> effective coefficients
    let (wb, bb) = split_masked_solution(masked, &best_masked_x);
    let bb = GroupVector::new(masked.partition().clone(), bb)?;
    let u_from_masked = masked.effective_coefficients(wb.as_deref(), &bb)?;
    let v = masked.equivalent_regularized_value(&u_from_masked)?;
    if v < best_u {
        best_u = v;
        best_u_x = u_from_masked.values().to_vec();
    }

    // cross-seed: regularized optimum -> optimal mask lift
    let u_gv = GroupVector::new(masked.partition().clone(), best_u_x.clone())?;
    let (wl, bl) = masked.lift(&u_gv)?;
    let lifted = masked.masked_value(wl.as_deref(), &bl)?;
    if lifted < best_masked {
        best_masked = lifted;
    }

    Ok((best_masked, best_u, best_u_x))
}

pub fn run(cfg: &EquivalenceConfig) -> Result<ExperimentOutput, CliError> {
    let mut rows: Vec<EquivalenceRow> = Vec::new();
    for &seed in &cfg.seeds {
        for instance in 0..cfg.instances_per_seed {
            let inst_seed = rng::derive(seed, 7700 + instance as u64);
            let inst = synth::random_regression(
                inst_seed,
                cfg.num_samples,
                cfg.num_features,
                cfg.num_groups,
                cfg.num_responses,
                cfg.mu_ridge,
            );
            let base: Arc<dyn groupprune::objectives::ConvexObjective> = Arc::new(inst.objective);
            for (kind, label) in MASK_KINDS {
                let masked =
                    MaskedObjective::new(base.clone(), kind, cfg.lambda).map_err(to_runtime)?;
                let (masked_opt, reg_opt, reg_x) =
                    equivalence_gap(&masked, cfg.restarts, seed ^ instance as u64)
                        .map_err(to_runtime)?;
                let rel_gap = (masked_opt - reg_opt).abs() / reg_opt.abs().max(1.0);
                let penalty = masked.equivalent_penalty();
                let probe = ProbeSpec {
                    seed: seed ^ 0xa5a5,
                    random_probes: 240,
                    ..ProbeSpec::default()
                };
                let ver = verify_global_min(base.as_ref(), &penalty, &reg_x, &probe)
                    .map_err(to_runtime)?;
                rows.push(EquivalenceRow {
                    seed,
                    instance,
                    mask_kind: label.to_string(),
                    masked_optimum: masked_opt,
                    regularized_optimum: reg_opt,
                    rel_gap,
                    oracle_verified: ver.verified,
                });
            }
        }
    }

    let mut summary_text = String::from("mask_kind  max_rel_gap  verified/total\n");
    let mut per_kind = serde_json::Map::new();
    for (_, label) in MASK_KINDS {
        let kind_rows: Vec<&EquivalenceRow> =
            rows.iter().filter(|r| r.mask_kind == label).collect();
        let max_gap = kind_rows.iter().map(|r| r.rel_gap).fold(0.0f64, f64::max);
        let verified = kind_rows.iter().filter(|r| r.oracle_verified).count();
        summary_text.push_str(&format!(
            "{label:<10} {max_gap:<12.3e} {verified}/{}\n",
            kind_rows.len()
        ));
        per_kind.insert(
            label.to_string(),
            json!({"max_rel_gap": max_gap, "verified": verified, "total": kind_rows.len()}),
        );
    }

    let traces = vec![TraceFile {
        seed: cfg.seeds[0],
        name: "equivalence_gaps".into(),
        header: vec![
            "seed".into(),
            "instance".into(),
            "mask_kind".into(),
            "masked_optimum".into(),
            "regularized_optimum".into(),
            "rel_gap".into(),
            "oracle_verified".into(),
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    r.instance.to_string(),
                    r.mask_kind.clone(),
                    crate::data::fmt_f64(r.masked_optimum),
                    crate::data::fmt_f64(r.regularized_optimum),
                    crate::data::fmt_f64(r.rel_gap),
                    r.oracle_verified.to_string(),
                ]
            })
            .collect(),
    }];

    Ok(ExperimentOutput {
        results: json!({"rows": rows, "per_kind": per_kind}),
        traces,
        summary_text,
    })
}
