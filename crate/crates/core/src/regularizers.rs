//! Nonconvex q-functions, the composite group regularizer, the Lambert W
//! evaluator and the block soft-threshold operator.
//!
//! A q-function is strictly increasing on the nonnegative reals with
//! `q(0) = 0`. The composite regularizer applies `lambda * q_inv(sum_i
//! q(|beta|_Ti|_2))` over a group partition; with the absolute value it
//! reduces exactly to the group LASSO penalty `lambda * sum_i |beta|_Ti|_2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupPartition, GroupVector};
use crate::linalg::norm2;

/// Norms are clamped below this before q' evaluation; fractional powers have
/// unbounded derivative at zero.
pub const NORM_CLAMP: f64 = 1e-10;

fn default_eps() -> f64 {
    1.0
}

/// The supported q-function family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QFunction {
    /// q(x) = x
    Abs,
    /// q(x) = x^p for p in (0, 1]
    Power { p: f64 },
    /// q(x) = eps * ln(1 + x/eps); eps = 1 recovers ln(1 + x)
    LogSum {
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// q(a) = W(2a^2)^2/4 + W(2a^2)/2, the penalty induced by unnormalized
    /// softmax masks under l2 regularization
    Lambert,
}

impl QFunction {
    /// Validate the kind's parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            QFunction::Power { p } if !(*p > 0.0 && *p <= 1.0) => Err(Error::InvalidArgument(
                format!("power exponent must lie in (0, 1], got {p}"),
            )),
            QFunction::LogSum { eps } if !(*eps > 0.0) => Err(Error::InvalidArgument(format!(
                "logsum scale must be positive, got {eps}"
            ))),
            _ => Ok(()),
        }
    }

    /// Evaluate q at `x >= 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "q is defined on nonnegative reals, got {x}"
            )));
        }
        Ok(match self {
            QFunction::Abs => x,
            QFunction::Power { p } => x.powf(*p),
            QFunction::LogSum { eps } => eps * (1.0 + x / eps).ln(),
            QFunction::Lambert => {
                let w = lambert_w(2.0 * x * x)?;
                w * w / 4.0 + w / 2.0
            }
        })
    }

    /// Inverse of q at `y >= 0`: closed forms where available, numeric
    /// (bisection + Newton) for the Lambert-induced kind.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 || y.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "q_inverse is defined on nonnegative reals, got {y}"
            )));
        }
        Ok(match self {
            QFunction::Abs => y,
            QFunction::Power { p } => y.powf(1.0 / p),
            QFunction::LogSum { eps } => eps * ((y / eps).exp() - 1.0),
            QFunction::Lambert => invert_lambert_q(y)?,
        })
    }

    /// Derivative q'(x) for x > 0 (the value at the clamp is used below it).
    /// For the Lambert kind q'(x) = W(2x^2)/x, which tends to 0 at the origin.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "q' is defined on nonnegative reals, got {x}"
            )));
        }
        let x = x.max(NORM_CLAMP);
        Ok(match self {
            QFunction::Abs => 1.0,
            QFunction::Power { p } => p * x.powf(p - 1.0),
            QFunction::LogSum { eps } => eps / (eps + x),
            QFunction::Lambert => lambert_w(2.0 * x * x)? / x,
        })
    }

    /// Whether q(a + b) <= q(a) + q(b) holds for all nonnegative a, b.
    /// True for the concave kinds; the Lambert-induced q grows like a^2 near
    /// the origin and is therefore superadditive at small scales.
    pub fn is_subadditive(&self) -> bool {
        !matches!(self, QFunction::Lambert)
    }
}

/// Principal-branch Lambert W on nonnegative arguments: the `w >= 0` with
/// `w * exp(w) = x`. Log-based initial guess refined by Halley iterations;
/// the returned value has relative residual at most 1e-12.
pub fn lambert_w(x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "lambert_w supports the principal branch on x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < 1e-300 {
        return Ok(x); // W(x) ~ x below any representable correction
    }
    let mut w = if x > std::f64::consts::E {
        let l = x.ln();
        l - l.ln()
    } else {
        (1.0 + x).ln() * 0.5 + x / (2.0 + 2.0 * x)
    };
    let tol = 1e-13 * x.max(1.0);
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= tol {
            break;
        }
        // Halley step for f(w) = w e^w - x
        let fp = ew * (1.0 + w);
        let denom = fp - f * (w + 2.0) / (2.0 * (w + 1.0));
        w -= f / denom;
    }
    let resid = (w * w.exp() - x).abs();
    if resid > 1e-12 * x.max(1.0) {
        return Err(Error::Diverged {
            iteration: 100,
            detail: format!("lambert_w residual {resid} at x = {x}"),
        });
    }
    Ok(w)
}

/// Numeric inverse of the Lambert-induced q via bracketed bisection refined
/// by Newton, with absolute q-residual at most 1e-12.
fn invert_lambert_q(y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let q = QFunction::Lambert;
    let mut lo = 0.0;
    let mut hi = y + 1.0 + y * y;
    debug_assert!(q.eval(hi)? >= y);
    let mut x = 0.5 * hi;
    for _ in 0..200 {
        let fx = q.eval(x)? - y;
        if fx.abs() <= 1e-12 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton with q'(x) = W(2x^2)/x, falling back to bisection when the
        // step leaves the bracket
        let d = q.derivative(x)?;
        let newton = x - fx / d;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let resid = (q.eval(x)? - y).abs();
    if resid <= 1e-10 {
        Ok(x)
    } else {
        Err(Error::Diverged {
            iteration: 200,
            detail: format!("lambert q inverse residual {resid} at y = {y}"),
        })
    }
}

/// The composite group regularizer `lambda * q_inv(sum_i q(|beta|_Ti|_2))`.
#[derive(Debug, Clone)]
pub struct CompositeRegularizer {
    q: QFunction,
    lambda: f64,
    partition: Arc<GroupPartition>,
}

impl CompositeRegularizer {
    pub fn new(q: QFunction, lambda: f64, partition: Arc<GroupPartition>) -> Result<Self> {
        q.validate()?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization parameter must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            q,
            lambda,
            partition,
        })
    }

    pub fn q(&self) -> QFunction {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn partition(&self) -> &Arc<GroupPartition> {
        &self.partition
    }

    /// Penalty value from precomputed group norms.
    pub fn value_of_norms(&self, norms: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for &s in norms {
            sum += self.q.eval(s)?;
        }
        Ok(self.lambda * self.q.inverse(sum)?)
    }

    /// Penalty value at a group vector.
    pub fn value(&self, beta: &GroupVector) -> Result<f64> {
        self.value_of_norms(&beta.group_norms())
    }

    /// Per-group majorization weights at the current group norms: the partial
    /// derivatives `lambda * (q_inv)'(S) * q'(s_i)` of the composite with
    /// respect to each group norm, `S = sum_j q(s_j)`. Norms are clamped at
    /// [`NORM_CLAMP`] so fractional powers stay finite.
    pub fn mm_weights(&self, norms: &[f64]) -> Result<Vec<f64>> {
        let mut sum = 0.0;
        for &s in norms {
            sum += self.q.eval(s.max(NORM_CLAMP))?;
        }
        // (q_inv)'(S) = 1 / q'(q_inv(S))
        let at = self.q.inverse(sum)?.max(NORM_CLAMP);
        let dinv = 1.0 / self.q.derivative(at)?;
        norms
            .iter()
            .map(|&s| Ok(self.lambda * dinv * self.q.derivative(s.max(NORM_CLAMP))?))
            .collect()
    }
}

/// Proximal operator of `theta * |.|_2`: scales `v` toward zero and returns
/// exactly zero once `|v|_2 <= theta`.
pub fn block_soft_threshold(v: &[f64], theta: f64) -> Vec<f64> {
    debug_assert!(theta >= 0.0);
    let nrm = norm2(v);
    if nrm <= theta {
        return vec![0.0; v.len()];
    }
    let scale = 1.0 - theta / nrm;
    v.iter().map(|x| scale * x).collect()
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn q_strictly_increasing(a in 0.0f64..50.0, d in 0.01f64..10.0) {
            for q in [
                QFunction::Abs,
                QFunction::Power { p: 0.5 },
                QFunction::Power { p: 2.0 / 3.0 },
                QFunction::LogSum { eps: 1.0 },
                QFunction::Lambert,
            ] {
                prop_assert!(q.eval(a + d).unwrap() > q.eval(a).unwrap());
            }
        }

        #[test]
        fn subadditivity_of_concave_kinds(a in 0.0f64..50.0, b in 0.0f64..50.0) {
            for q in [
                QFunction::Abs,
                QFunction::Power { p: 0.5 },
                QFunction::Power { p: 2.0 / 3.0 },
                QFunction::LogSum { eps: 1.0 },
                QFunction::LogSum { eps: 0.2 },
            ] {
                let lhs = q.eval(a + b).unwrap();
                let rhs = q.eval(a).unwrap() + q.eval(b).unwrap();
                prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
            }
        }

        #[test]
        fn prox_never_flips_sign_and_shrinks(x in -10.0f64..10.0, y in -10.0f64..10.0, theta in 0.0f64..5.0) {
            let v = [x, y];
            let out = block_soft_threshold(&v, theta);
            prop_assert!(norm2(&out) <= norm2(&v) + 1e-12);
            for (o, i) in out.iter().zip(v.iter()) {
                prop_assert!(o * i >= 0.0);
            }
        }

        #[test]
        fn lambert_w_residual_random(x in 0.0f64..1e5) {
            let w = lambert_w(x).unwrap();
            prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.max(1.0));
        }
    }
}
