//! Strictly convex differentiable losses with analytic gradients.
//!
//! Both objectives flatten a `d x K` coefficient matrix feature-major
//! (coefficient of feature j, response k sits at index `j * K + k`); block
//! partitions over coefficient matrices are defined in this fixed layout.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::groups::{argmax_lowest, GroupPartition};
use crate::linalg;

/// Default ridge weight; keeps strict convexity unconditional.
pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Anything with a value and a gradient over a flat coordinate vector.
pub trait SmoothFn {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// A strictly convex differentiable loss over `n` coefficients tied to a
/// group partition. Implementations add `(mu_ridge / 2) * |beta|_2^2` to the
/// data term; `dim()` always equals `partition().n()`.
pub trait ConvexObjective: SmoothFn + Send + Sync {
    fn partition(&self) -> &Arc<GroupPartition>;

    fn n(&self) -> usize {
        self.partition().n()
    }

    /// Whether strict convexity is guaranteed (positive ridge, or a full-rank
    /// quadratic data term).
    fn strictly_convex(&self) -> bool;
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Multi-response least squares: `0.5 |X B - Y|_F^2 + (mu/2) |beta|_2^2`
/// where `B` is `beta` reshaped `d x K`.
#[derive(Debug, Clone)]
pub struct LeastSquaresObjective {
    x: Array2<f64>,
    y: Array2<f64>,
    partition: Arc<GroupPartition>,
    mu_ridge: f64,
    full_rank: bool,
}

impl LeastSquaresObjective {
    pub fn new(
        x: Array2<f64>,
        y: Array2<f64>,
        partition: Arc<GroupPartition>,
        mu_ridge: f64,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.nrows(),
            });
        }
        if mu_ridge < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ridge weight must be nonnegative, got {mu_ridge}"
            )));
        }
        let n = x.ncols() * y.ncols();
        check_len(partition.n(), n)?;
        let full_rank = linalg::cholesky(&x.t().dot(&x)).is_ok();
        Ok(Self {
            x,
            y,
            partition,
            mu_ridge,
            full_rank,
        })
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_responses(&self) -> usize {
        self.y.ncols()
    }

    pub fn mu_ridge(&self) -> f64 {
        self.mu_ridge
    }

    fn beta_matrix(&self, beta: &[f64]) -> Array2<f64> {
        let (d, k) = (self.x.ncols(), self.y.ncols());
        Array2::from_shape_fn((d, k), |(j, c)| beta[j * k + c])
    }
}

impl SmoothFn for LeastSquaresObjective {
    fn dim(&self) -> usize {
        self.partition.n()
    }

    fn value(&self, beta: &[f64]) -> Result<f64> {
        check_len(self.dim(), beta.len())?;
        let resid = self.x.dot(&self.beta_matrix(beta)) - &self.y;
        let fit = 0.5 * resid.iter().map(|r| r * r).sum::<f64>();
        let ridge = 0.5 * self.mu_ridge * beta.iter().map(|b| b * b).sum::<f64>();
        Ok(fit + ridge)
    }

    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), beta.len())?;
        let resid = self.x.dot(&self.beta_matrix(beta)) - &self.y;
        let g = self.x.t().dot(&resid);
        let k = self.y.ncols();
        let mut out = vec![0.0; self.dim()];
        for j in 0..self.x.ncols() {
            for c in 0..k {
                out[j * k + c] = g[(j, c)] + self.mu_ridge * beta[j * k + c];
            }
        }
        Ok(out)
    }
}

impl ConvexObjective for LeastSquaresObjective {
    fn partition(&self) -> &Arc<GroupPartition> {
        &self.partition
    }

    fn strictly_convex(&self) -> bool {
        self.mu_ridge > 0.0 || self.full_rank
    }
}

/// Multinomial logistic regression with mean cross-entropy:
/// `(1/m) sum_i -log softmax(x_i B)_{y_i} + (mu/2) |beta|_2^2`.
#[derive(Debug, Clone)]
pub struct MultinomialLogisticObjective {
    x: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    partition: Arc<GroupPartition>,
    mu_ridge: f64,
}

impl MultinomialLogisticObjective {
    pub fn new(
        x: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        partition: Arc<GroupPartition>,
        mu_ridge: f64,
    ) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: labels.len(),
            });
        }
        if num_classes < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if mu_ridge < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ridge weight must be nonnegative, got {mu_ridge}"
            )));
        }
        check_len(partition.n(), x.ncols() * num_classes)?;
        Ok(Self {
            x,
            labels,
            num_classes,
            partition,
            mu_ridge,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mu_ridge(&self) -> f64 {
        self.mu_ridge
    }

    fn logits(&self, beta: &[f64]) -> Array2<f64> {
        let (d, k) = (self.x.ncols(), self.num_classes);
        let b = Array2::from_shape_fn((d, k), |(j, c)| beta[j * k + c]);
        self.x.dot(&b)
    }
}

/// Row-wise softmax with max subtraction.
fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    p
}

impl SmoothFn for MultinomialLogisticObjective {
    fn dim(&self) -> usize {
        self.partition.n()
    }

    fn value(&self, beta: &[f64]) -> Result<f64> {
        check_len(self.dim(), beta.len())?;
        let z = self.logits(beta);
        let m = self.x.nrows() as f64;
        let mut loss = 0.0;
        for (i, row) in z.rows().into_iter().enumerate() {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            loss += lse - row[self.labels[i]];
        }
        let ridge = 0.5 * self.mu_ridge * beta.iter().map(|b| b * b).sum::<f64>();
        Ok(loss / m + ridge)
    }

    fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), beta.len())?;
        let z = self.logits(beta);
        let mut p = softmax_rows(&z);
        for (i, &label) in self.labels.iter().enumerate() {
            p[(i, label)] -= 1.0;
        }
        let m = self.x.nrows() as f64;
        let g = self.x.t().dot(&p);
        let k = self.num_classes;
        let mut out = vec![0.0; self.dim()];
        for j in 0..self.x.ncols() {
            for c in 0..k {
                out[j * k + c] = g[(j, c)] / m + self.mu_ridge * beta[j * k + c];
            }
        }
        Ok(out)
    }
}

impl ConvexObjective for MultinomialLogisticObjective {
    fn partition(&self) -> &Arc<GroupPartition> {
        &self.partition
    }

    fn strictly_convex(&self) -> bool {
        self.mu_ridge > 0.0
    }
}

/// The activation threshold `tau = max_i |grad L(0)|_Ti|_2` together with the
/// group attaining it (lowest index on ties). Regularization at or above tau
/// forces the zero solution; just below, a one-group-sparse solution on the
/// returned group.
pub fn tau_threshold(obj: &dyn ConvexObjective) -> Result<(f64, usize)> {
    let g0 = obj.gradient(&vec![0.0; obj.n()])?;
    let norms = obj.partition().group_norms_of(&g0)?;
    let arg = argmax_lowest(&norms).expect("partition has at least one group");
    Ok((norms[arg], arg))
}

/// Central-difference gradient of a smooth function, used as the oracle for
/// analytic gradients throughout the test suites.
pub fn central_difference_gradient<F: SmoothFn + ?Sized>(
    f: &F,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f.value(&xp)?;
        xp[i] = xi - h;
        let fm = f.value(&xp)?;
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Relative gradient error `|g - fd| / max(1, |fd|)`.
pub fn gradient_rel_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let mut diff = 0.0;
    for (a, b) in analytic.iter().zip(fd) {
        diff += (a - b) * (a - b);
    }
    diff.sqrt() / linalg::norm2(fd).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    fn identity_ls(y: Vec<f64>, groups: Vec<Vec<usize>>, mu: f64) -> LeastSquaresObjective {
        let d = y.len();
        let x = Array2::eye(d);
        let ym = Array2::from_shape_vec((d, 1), y).unwrap();
        let p = Arc::new(GroupPartition::new(d, groups).unwrap());
        LeastSquaresObjective::new(x, ym, p, mu).unwrap()
    }

    #[test]
    fn least_squares_value_at_zero_is_half_y_norm() {
        let obj = identity_ls(vec![3.0, 0.0, 1.0, 1.0], vec![vec![0, 1], vec![2, 3]], 0.0);
        let v = obj.value(&[0.0; 4]).unwrap();
        assert!((v - 0.5 * 11.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_exact_fit_is_zero() {
        let obj = identity_ls(vec![3.0, 0.0, 1.0, 1.0], vec![vec![0, 1], vec![2, 3]], 0.0);
        assert!(obj.value(&[3.0, 0.0, 1.0, 1.0]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn least_squares_gradient_at_zero_is_neg_xty() {
        let x = array![[1.0, 2.0], [0.0, 1.0], [1.0, 0.0]];
        let y = array![[1.0], [2.0], [3.0]];
        let p = Arc::new(GroupPartition::single(2).unwrap());
        let obj = LeastSquaresObjective::new(x.clone(), y.clone(), p, 0.0).unwrap();
        let g = obj.gradient(&[0.0, 0.0]).unwrap();
        let expect = x.t().dot(&y);
        assert!((g[0] + expect[(0, 0)]).abs() < 1e-14);
        assert!((g[1] + expect[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn multinomial_value_at_zero_is_log_k() {
        let mut r = rng::seeded(1);
        let m = 12;
        let d = 3;
        let k = 4;
        let x = Array2::from_shape_fn((m, d), |_| rng::normal(&mut r));
        let labels: Vec<usize> = (0..m).map(|i| i % k).collect();
        let p = Arc::new(GroupPartition::single(d * k).unwrap());
        let obj = MultinomialLogisticObjective::new(x, labels, k, p, 0.0).unwrap();
        let v = obj.value(&vec![0.0; d * k]).unwrap();
        assert!((v - (k as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let obj = identity_ls(vec![1.0, 2.0], vec![vec![0, 1]], 0.0);
        assert!(matches!(
            obj.value(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(obj.gradient(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn tau_threshold_identity_design() {
        // grad L(0) = -y; group norms (3, sqrt(2)) -> tau = 3 on group 0
        let obj = identity_ls(vec![3.0, 0.0, 1.0, 1.0], vec![vec![0, 1], vec![2, 3]], 0.0);
        let (tau, g) = tau_threshold(&obj).unwrap();
        assert!((tau - 3.0).abs() < 1e-14);
        assert_eq!(g, 0);
    }

    #[test]
    fn tau_threshold_zero_response() {
        let obj = identity_ls(vec![0.0; 4], vec![vec![0, 1], vec![2, 3]], 0.0);
        let (tau, g) = tau_threshold(&obj).unwrap();
        assert_eq!(tau, 0.0);
        assert_eq!(g, 0);
    }

    #[test]
    fn tau_threshold_single_group_is_full_gradient_norm() {
        let obj = identity_ls(vec![3.0, 0.0, 1.0, 1.0], vec![vec![0, 1, 2, 3]], 0.0);
        let (tau, g) = tau_threshold(&obj).unwrap();
        assert!((tau - 11.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(g, 0);
    }

    fn random_ls(seed: u64) -> LeastSquaresObjective {
        let mut r = rng::seeded(seed);
        let (m, d, k) = (8, 5, 2);
        let x = Array2::from_shape_fn((m, d), |_| rng::normal(&mut r));
        let y = Array2::from_shape_fn((m, k), |_| rng::normal(&mut r));
        let p = Arc::new(GroupPartition::blocks(d, k, 2).unwrap());
        LeastSquaresObjective::new(x, y, p, 0.05).unwrap()
    }

    fn random_logistic(seed: u64) -> MultinomialLogisticObjective {
        let mut r = rng::seeded(seed);
        let (m, d, k) = (15, 4, 3);
        let x = Array2::from_shape_fn((m, d), |_| rng::normal(&mut r));
        let labels: Vec<usize> = (0..m).map(|_| rng::index(&mut r, k)).collect();
        let p = Arc::new(GroupPartition::blocks(d, k, 2).unwrap());
        MultinomialLogisticObjective::new(x, labels, k, p, 0.05).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10u64 {
            let ls = random_ls(seed);
            let lg = random_logistic(seed + 100);
            let mut r = rng::seeded(seed + 777);
            let b1 = rng::normal_vec(&mut r, ls.n());
            let b2 = rng::normal_vec(&mut r, lg.n());
            for (obj, beta) in [
                (&ls as &dyn ConvexObjective, &b1),
                (&lg as &dyn ConvexObjective, &b2),
            ] {
                let g = obj.gradient(beta).unwrap();
                let fd = central_difference_gradient(obj, beta, 1e-5).unwrap();
                let err = gradient_rel_error(&g, &fd);
                assert!(err <= 1e-5, "seed {seed}: rel err {err}");
            }
        }
    }

    #[test]
    fn midpoint_convexity_holds() {
        for seed in 0..8u64 {
            let obj = random_logistic(seed);
            let mut r = rng::seeded(seed + 31);
            let a = rng::normal_vec(&mut r, obj.n());
            let b = rng::normal_vec(&mut r, obj.n());
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let lhs = obj.value(&mid).unwrap();
            let rhs = 0.5 * (obj.value(&a).unwrap() + obj.value(&b).unwrap());
            assert!(lhs <= rhs + 1e-12);
            // with a positive ridge the gap is at least the ridge's exact
            // quadratic margin (mu/8) |a - b|^2
            let mu = obj.mu_ridge();
            let dist_sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            assert!(lhs <= rhs - mu / 8.0 * dist_sq + 1e-9);
        }
    }

    #[test]
    fn strict_convexity_flags() {
        let obj = identity_ls(vec![1.0, 2.0], vec![vec![0], vec![1]], 0.0);
        assert!(obj.strictly_convex()); // identity design is full rank
        let x = array![[1.0, 1.0], [1.0, 1.0]];
        let y = array![[1.0], [1.0]];
        let p = Arc::new(GroupPartition::single(2).unwrap());
        let rank_deficient = LeastSquaresObjective::new(x, y, p, 0.0).unwrap();
        assert!(!rank_deficient.strictly_convex());
        assert!(random_logistic(3).strictly_convex());
    }

    #[test]
    fn gradient_vanishes_at_unconstrained_minimum() {
        // ridge least squares with identity design: minimizer y / (1 + mu)
        let mu = 0.3;
        let obj = identity_ls(vec![2.0, -1.0], vec![vec![0], vec![1]], mu);
        let beta: Vec<f64> = [2.0, -1.0].iter().map(|y| y / (1.0 + mu)).collect();
        let g = obj.gradient(&beta).unwrap();
        assert!(linalg::norm2(&g) < 1e-12);
    }
}
