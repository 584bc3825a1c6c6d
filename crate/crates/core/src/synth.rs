//! Deterministic synthetic problem generators.
//!
//! Every generator is a pure function of its seed (ChaCha8 streams split per
//! consumer), so the same spec always reproduces the same instance.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::Result;
use crate::groups::GroupPartition;
use crate::linalg::orthonormalize_columns;
use crate::objectives::LeastSquaresObjective;
use crate::rng;

/// Chop `[0, n)` into `t` contiguous groups of near-equal size.
pub fn contiguous_partition(n: usize, t: usize) -> Result<GroupPartition> {
    let t = t.min(n).max(1);
    let chunk = n.div_ceil(t);
    let groups: Vec<Vec<usize>> = (0..n)
        .collect::<Vec<_>>()
        .chunks(chunk)
        .map(|c| c.to_vec())
        .collect();
    GroupPartition::new(n, groups)
}

/// Random matrix with orthonormal columns (requires m >= d).
pub fn orthonormal_design(r: &mut rng::CrateRng, m: usize, d: usize) -> Array2<f64> {
    let mut x = Array2::from_shape_fn((m, d), |_| rng::normal(r));
    orthonormalize_columns(&mut x).expect("random Gaussian columns are independent");
    x
}

/// A single-response regression instance with known planted structure.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub partition: Arc<GroupPartition>,
    pub beta_star: Vec<f64>,
    pub planted_groups: Vec<usize>,
    pub mu_ridge: f64,
    pub objective: LeastSquaresObjective,
}

fn build_instance(
    x: Array2<f64>,
    y: Array2<f64>,
    partition: Arc<GroupPartition>,
    beta_star: Vec<f64>,
    planted_groups: Vec<usize>,
    mu_ridge: f64,
) -> RegressionInstance {
    let objective = LeastSquaresObjective::new(x.clone(), y.clone(), partition.clone(), mu_ridge)
        .expect("generator shapes are consistent");
    RegressionInstance {
        x,
        y,
        partition,
        beta_star,
        planted_groups,
        mu_ridge,
        objective,
    }
}

/// Orthonormal design, signal planted on exactly one group, noiseless
/// response. Off-support gradients vanish at every solution supported on the
/// planted group, which makes the instance exactly separable.
pub fn separable_regression(seed: u64, d: usize, t: usize, mu_ridge: f64) -> RegressionInstance {
    let mut r = rng::split(seed, 101);
    let m = d + 6;
    let x = orthonormal_design(&mut r, m, d);
    let partition = Arc::new(contiguous_partition(d, t).unwrap());
    let planted = rng::index(&mut r, partition.num_groups());
    let mut beta_star = vec![0.0; d];
    for &i in partition.group(planted) {
        beta_star[i] = rng::normal(&mut r) + 2.0 * rng::normal(&mut r).signum();
    }
    let y_vec = x.dot(&Array2::from_shape_vec((d, 1), beta_star.clone()).unwrap());
    build_instance(x, y_vec, partition, beta_star, vec![planted], mu_ridge)
}

/// Orthonormal design with one dominant planted group and strictly smaller
/// signal on every other group: the second-largest gradient-at-zero group
/// norm is at most `margin` times the largest.
pub fn well_separated_regression(
    seed: u64,
    d: usize,
    t: usize,
    margin: f64,
    mu_ridge: f64,
) -> RegressionInstance {
    let mut r = rng::split(seed, 103);
    let m = d + 6;
    let x = orthonormal_design(&mut r, m, d);
    let partition = Arc::new(contiguous_partition(d, t).unwrap());
    let planted = rng::index(&mut r, partition.num_groups());
    let mut beta_star = vec![0.0; d];
    let lead = 3.0;
    for (gi, group) in partition.groups().iter().enumerate() {
        let dir: Vec<f64> = group.iter().map(|_| rng::normal(&mut r)).collect();
        let nrm = crate::linalg::norm2(&dir).max(1e-12);
        let target = if gi == planted {
            lead
        } else {
            // strictly below margin * lead
            margin * lead * rng::uniform(&mut r, 0.2, 0.9)
        };
        for (&i, &v) in group.iter().zip(&dir) {
            beta_star[i] = target * v / nrm;
        }
    }
    let y_vec = x.dot(&Array2::from_shape_vec((d, 1), beta_star.clone()).unwrap());
    build_instance(x, y_vec, partition, beta_star, vec![planted], mu_ridge)
}

/// Fully random dense K-response instance (Gaussian design and responses).
pub fn random_regression(
    seed: u64,
    m: usize,
    d: usize,
    t: usize,
    k_responses: usize,
    mu_ridge: f64,
) -> RegressionInstance {
    let mut r = rng::split(seed, 107);
    let x = Array2::from_shape_fn((m, d), |_| rng::normal(&mut r));
    let y = Array2::from_shape_fn((m, k_responses), |_| rng::normal(&mut r));
    let partition = Arc::new(contiguous_partition(d * k_responses, t).unwrap());
    build_instance(
        x,
        y,
        partition,
        vec![0.0; d * k_responses],
        vec![],
        mu_ridge,
    )
}

/// Orthonormal design with `k` planted groups (distinct, per-group scales in
/// [1, 3]) and optional Gaussian response noise. The ground-truth support is
/// returned sorted.
pub fn planted_group_regression(
    seed: u64,
    d: usize,
    t: usize,
    k: usize,
    noise: f64,
    mu_ridge: f64,
) -> RegressionInstance {
    let mut r = rng::split(seed, 109);
    let m = d + 8;
    let x = orthonormal_design(&mut r, m, d);
    let partition = Arc::new(contiguous_partition(d, t).unwrap());
    let tt = partition.num_groups();
    assert!(k <= tt, "cannot plant {k} groups out of {tt}");
    // distinct groups by seeded shuffle
    let mut order: Vec<usize> = (0..tt).collect();
    for i in (1..tt).rev() {
        let j = rng::index(&mut r, i + 1);
        order.swap(i, j);
    }
    let mut planted: Vec<usize> = order.into_iter().take(k).collect();
    planted.sort_unstable();
    let mut beta_star = vec![0.0; d];
    for &g in &planted {
        let group = partition.group(g);
        let dir: Vec<f64> = group.iter().map(|_| rng::normal(&mut r)).collect();
        let nrm = crate::linalg::norm2(&dir).max(1e-12);
        let scale = rng::uniform(&mut r, 1.0, 3.0);
        for (&i, &v) in group.iter().zip(&dir) {
            beta_star[i] = scale * v / nrm;
        }
    }
    let mut y = x.dot(&Array2::from_shape_vec((d, 1), beta_star.clone()).unwrap());
    if noise > 0.0 {
        for v in y.iter_mut() {
            *v += noise * rng::normal(&mut r);
        }
    }
    build_instance(x, y, partition, beta_star, planted, mu_ridge)
}

/// Spec for the planted block-sparse teacher classification task.
#[derive(Debug, Clone)]
pub struct TeacherSpec {
    pub num_features: usize,
    pub hidden_width: usize,
    pub num_classes: usize,
    pub block_size: usize,
    /// Number of nonzero first-layer blocks in the teacher.
    pub planted_blocks: usize,
    pub num_train: usize,
    pub num_eval: usize,
    pub seed: u64,
    /// Reject samples whose top-two standardized teacher logits are closer
    /// than this, widening the decision boundaries (0 keeps every draw).
    pub label_margin: f64,
}

/// Classification dataset labelled by a two-layer ReLU teacher whose first
/// layer is block-sparse.
#[derive(Debug, Clone)]
pub struct TeacherClassification {
    pub x_train: Array2<f64>,
    pub y_train: Vec<usize>,
    pub x_eval: Array2<f64>,
    pub y_eval: Vec<usize>,
    pub teacher_w1: Array2<f64>,
    pub teacher_w2: Array2<f64>,
    pub partition: Arc<GroupPartition>,
    pub planted: Vec<usize>,
    pub spec: TeacherSpec,
}

pub fn planted_block_teacher(spec: &TeacherSpec) -> Result<TeacherClassification> {
    let TeacherSpec {
        num_features: d,
        hidden_width: h,
        num_classes: k,
        block_size: b,
        planted_blocks,
        num_train,
        num_eval,
        seed,
        ..
    } = *spec;
    let partition = Arc::new(GroupPartition::blocks(d, h, b)?);
    let tt = partition.num_groups();
    if planted_blocks > tt {
        return Err(crate::error::Error::InvalidArgument(format!(
            "cannot plant {planted_blocks} blocks out of {tt}"
        )));
    }
    let mut r = rng::split(seed, 211);
    let mut order: Vec<usize> = (0..tt).collect();
    for i in (1..tt).rev() {
        let j = rng::index(&mut r, i + 1);
        order.swap(i, j);
    }
    let mut planted: Vec<usize> = order.into_iter().take(planted_blocks).collect();
    planted.sort_unstable();

    // Block scales vary so that selecting blocks by raw magnitude after dense
    // training is imperfect while the signal stays learnable.
    let mut w1 = Array2::zeros((d, h));
    let w1_scale = (2.0 / d as f64).sqrt();
    for &g in &planted {
        let block_scale = rng::uniform(&mut r, 1.0, 2.0);
        for &flat in partition.group(g) {
            let (row, col) = (flat / h, flat % h);
            w1[(row, col)] = block_scale * w1_scale * rng::normal(&mut r);
        }
    }
    let w2_scale = (2.0 / h as f64).sqrt();
    let w2 = Array2::from_shape_fn((h, k), |_| w2_scale * rng::normal(&mut r));

    let raw_logits = |x_row: &[f64]| -> Vec<f64> {
        let mut hid = vec![0.0; h];
        for (c, hv) in hid.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, &xv) in x_row.iter().enumerate() {
                s += xv * w1[(j, c)];
            }
            *hv = s.max(0.0);
        }
        let mut logits = vec![0.0; k];
        for (c, l) in logits.iter_mut().enumerate() {
            for (j, &hv) in hid.iter().enumerate() {
                *l += hv * w2[(j, c)];
            }
        }
        logits
    };

    // per-class centering and scaling from a seeded calibration draw, so the
    // argmax labels are roughly class-balanced
    let offsets = calibrate_offsets(seed, d, k, &raw_logits);
    let labeler = |x_row: &[f64]| argmax_adjusted(&raw_logits(x_row), &offsets);

    let (x_train, y_train) = sample_split(seed, 223, num_train, d, spec.label_margin, &labeler)?;
    let (x_eval, y_eval) = sample_split(seed, 227, num_eval, d, spec.label_margin, &labeler)?;

    Ok(TeacherClassification {
        x_train,
        y_train,
        x_eval,
        y_eval,
        teacher_w1: w1,
        teacher_w2: w2,
        partition,
        planted,
        spec: spec.clone(),
    })
}

/// Per-class (mean, std) of raw teacher logits over a seeded calibration
/// draw; subtracting and rescaling balances the argmax labels.
fn calibrate_offsets<Fl: Fn(&[f64]) -> Vec<f64>>(
    seed: u64,
    d: usize,
    k: usize,
    raw_logits: &Fl,
) -> Vec<(f64, f64)> {
    let mut rc = rng::split(seed, 229);
    let samples = 2048;
    let mut sums = vec![0.0; k];
    let mut sq = vec![0.0; k];
    let mut row = vec![0.0; d];
    for _ in 0..samples {
        for v in row.iter_mut() {
            *v = rng::normal(&mut rc);
        }
        let logits = raw_logits(&row);
        for c in 0..k {
            sums[c] += logits[c];
            sq[c] += logits[c] * logits[c];
        }
    }
    (0..k)
        .map(|c| {
            let mean = sums[c] / samples as f64;
            let var = (sq[c] / samples as f64 - mean * mean).max(1e-12);
            (mean, var.sqrt())
        })
        .collect()
}

/// Winning class and the gap to the runner-up in standardized units.
fn argmax_adjusted(logits: &[f64], offsets: &[(f64, f64)]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for (c, &l) in logits.iter().enumerate() {
        let (mean, std) = offsets[c];
        let z = (l - mean) / std;
        if z > best.1 {
            second = best.1;
            best = (c, z);
        } else if z > second {
            second = z;
        }
    }
    (best.0, best.1 - second)
}

/// Draw rows until each clears the label margin.
fn sample_split<Fl: Fn(&[f64]) -> (usize, f64)>(
    seed: u64,
    stream: u64,
    count: usize,
    d: usize,
    margin: f64,
    labeler: &Fl,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let mut rs = rng::split(seed, stream);
    let mut x = Array2::zeros((count, d));
    let mut y = Vec::with_capacity(count);
    let mut row = vec![0.0; d];
    for i in 0..count {
        let mut attempts = 0usize;
        loop {
            for v in row.iter_mut() {
                *v = rng::normal(&mut rs);
            }
            let (label, gap) = labeler(&row);
            if gap >= margin {
                for (j, &v) in row.iter().enumerate() {
                    x[(i, j)] = v;
                }
                y.push(label);
                break;
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(crate::error::Error::InvalidArgument(format!(
                    "label margin {margin} rejects nearly every sample"
                )));
            }
        }
    }
    Ok((x, y))
}

/// Classification labelled by a single block-sparse linear map: labels are
/// `argmax(x W*)` with `W*` a `d x K` matrix supported on planted blocks.
/// The block grid coincides with a student head of the same shape.
pub fn planted_linear_teacher(spec: &TeacherSpec) -> Result<TeacherClassification> {
    let TeacherSpec {
        num_features: d,
        num_classes: k,
        block_size: b,
        planted_blocks,
        num_train,
        num_eval,
        seed,
        ..
    } = *spec;
    let partition = Arc::new(GroupPartition::blocks(d, k, b)?);
    let tt = partition.num_groups();
    if planted_blocks > tt {
        return Err(crate::error::Error::InvalidArgument(format!(
            "cannot plant {planted_blocks} blocks out of {tt}"
        )));
    }
    let mut r = rng::split(seed, 307);
    let mut order: Vec<usize> = (0..tt).collect();
    for i in (1..tt).rev() {
        let j = rng::index(&mut r, i + 1);
        order.swap(i, j);
    }
    let mut planted: Vec<usize> = order.into_iter().take(planted_blocks).collect();
    planted.sort_unstable();
    let mut w = Array2::zeros((d, k));
    for &g in &planted {
        let scale = rng::uniform(&mut r, 0.8, 2.0);
        for &flat in partition.group(g) {
            let (row, col) = (flat / k, flat % k);
            w[(row, col)] = scale * rng::normal(&mut r);
        }
    }
    let raw_logits = |x_row: &[f64]| -> Vec<f64> {
        let mut logits = vec![0.0; k];
        for (c, l) in logits.iter_mut().enumerate() {
            for (j, &xv) in x_row.iter().enumerate() {
                *l += xv * w[(j, c)];
            }
        }
        logits
    };
    let offsets = calibrate_offsets(seed, d, k, &raw_logits);
    let labeler = |x_row: &[f64]| argmax_adjusted(&raw_logits(x_row), &offsets);
    let (x_train, y_train) = sample_split(seed, 311, num_train, d, spec.label_margin, &labeler)?;
    let (x_eval, y_eval) = sample_split(seed, 313, num_eval, d, spec.label_margin, &labeler)?;
    Ok(TeacherClassification {
        x_train,
        y_train,
        x_eval,
        y_eval,
        teacher_w1: w,
        teacher_w2: Array2::eye(k),
        partition,
        planted,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{tau_threshold, SmoothFn};

    #[test]
    fn separable_instance_gradient_concentrates_on_planted_group() {
        let inst = separable_regression(5, 8, 4, 0.0);
        let (_, arg) = tau_threshold(&inst.objective).unwrap();
        assert_eq!(arg, inst.planted_groups[0]);
        // gradient at zero vanishes off the planted group (orthonormal design)
        let g0 = inst.objective.gradient(&[0.0; 8]).unwrap();
        let norms = inst.partition.group_norms_of(&g0).unwrap();
        for (gi, nrm) in norms.iter().enumerate() {
            if gi != arg {
                assert!(*nrm < 1e-10, "group {gi} has off-support gradient {nrm}");
            }
        }
    }

    #[test]
    fn well_separated_margin_holds() {
        for seed in 0..5 {
            let inst = well_separated_regression(seed, 12, 4, 0.85, 0.01);
            let g0 = inst.objective.gradient(&[0.0; 12]).unwrap();
            let mut norms = inst.partition.group_norms_of(&g0).unwrap();
            norms.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(norms[1] <= 0.9 * norms[0]);
        }
    }

    #[test]
    fn planted_regression_is_noiseless_consistent() {
        let inst = planted_group_regression(9, 12, 6, 3, 0.0, 0.0);
        assert_eq!(inst.planted_groups.len(), 3);
        let v = inst.objective.value(&inst.beta_star).unwrap();
        assert!(v < 1e-20, "planted beta should fit exactly, got {v}");
    }

    #[test]
    fn same_seed_reproduces_instance() {
        let a = planted_group_regression(4, 10, 5, 2, 0.1, 0.0);
        let b = planted_group_regression(4, 10, 5, 2, 0.1, 0.0);
        assert_eq!(a.beta_star, b.beta_star);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn teacher_labels_use_all_classes() {
        let spec = TeacherSpec {
            num_features: 16,
            hidden_width: 16,
            num_classes: 4,
            block_size: 4,
            planted_blocks: 5,
            num_train: 400,
            num_eval: 100,
            seed: 3,
            label_margin: 0.0,
        };
        let data = planted_block_teacher(&spec).unwrap();
        let mut counts = [0usize; 4];
        for &y in &data.y_train {
            counts[y] += 1;
        }
        for (c, &cnt) in counts.iter().enumerate() {
            assert!(cnt > 0, "class {c} unused");
        }
        assert_eq!(data.planted.len(), 5);
        // only planted blocks are nonzero in the teacher
        let norms = data
            .partition
            .group_norms_of(data.teacher_w1.as_slice().unwrap())
            .unwrap();
        for (g, nrm) in norms.iter().enumerate() {
            let is_planted = data.planted.contains(&g);
            assert_eq!(is_planted, *nrm > 0.0, "block {g}");
        }
    }
}
