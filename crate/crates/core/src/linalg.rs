//! Small dense linear-algebra helpers for desk-scale problems.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Euclidean norm of a slice.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product of two slices (lengths must agree).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
/// Returns the lower factor, or an error when a pivot is not positive.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    let diag_max = (0..n).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max);
    let pivot_floor = 1e-12 * diag_max.max(1e-300);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= pivot_floor || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "matrix not positive definite at pivot {j} (d = {d})"
            )));
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Solve A x = b for symmetric positive definite A via Cholesky.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let l = cholesky(a)?;
    let n = b.len();
    // forward solve L y = b
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    // back solve L^T x = y
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Orthonormalize the columns of `a` in place with modified Gram-Schmidt
/// (two passes for numerical hygiene). Requires nrows >= ncols and
/// numerically independent columns.
pub fn orthonormalize_columns(a: &mut Array2<f64>) -> Result<()> {
    let (m, d) = a.dim();
    if m < d {
        return Err(Error::InvalidArgument(format!(
            "cannot orthonormalize {d} columns in {m} rows"
        )));
    }
    for _ in 0..2 {
        for j in 0..d {
            for k in 0..j {
                let proj: f64 = (0..m).map(|i| a[(i, k)] * a[(i, j)]).sum();
                for i in 0..m {
                    a[(i, j)] -= proj * a[(i, k)];
                }
            }
            let nrm: f64 = (0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
            if nrm < 1e-12 {
                return Err(Error::InvalidArgument(
                    "columns are numerically dependent".into(),
                ));
            }
            for i in 0..m {
                a[(i, j)] /= nrm;
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
/// Intended for small matrices (n up to a few dozen).
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solve_recovers_solution() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let x_true = array![1.5, -2.0];
        let b = a.dot(&x_true);
        let x = cholesky_solve(&a, &b).unwrap();
        for i in 0..2 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn orthonormalized_columns_have_identity_gram() {
        let mut rng = crate::rng::seeded(3);
        let m = 12;
        let d = 5;
        let mut a = Array2::from_shape_fn((m, d), |_| crate::rng::normal(&mut rng));
        orthonormalize_columns(&mut a).unwrap();
        let gram = a.t().dot(&a);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_matches_known_eigenvalues() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = symmetric_eigenvalues(&a).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-10);
        assert!((e[1] - 3.0).abs() < 1e-10);
    }
}
