//! Largest eigenvalue of a symmetric positive semidefinite operator given
//! only through matrix-vector products.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lanczos with full reorthogonalization and explicit restarts from the
/// current Ritz vector. Returns the largest eigenvalue.
pub fn largest_eigenvalue<F>(n: usize, apply: F, rel_tol: f64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if n == 0 {
        return Ok(0.0);
    }
    let steps = n.min(60);
    // deterministic, non-degenerate start vector
    let mut start = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7351).sin());
    let mut last = f64::NAN;
    for _restart in 0..50 {
        let norm = start.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let mut q: Vec<DVector<f64>> = vec![start / norm];
        let mut alpha = Vec::with_capacity(steps);
        let mut beta: Vec<f64> = Vec::with_capacity(steps);
        for j in 0..steps {
            let mut w = apply(&q[j]);
            let a = q[j].dot(&w);
            alpha.push(a);
            for _ in 0..2 {
                for qi in &q {
                    let c = qi.dot(&w);
                    w.axpy(-c, qi, 1.0);
                }
            }
            let b = w.norm();
            let scale = alpha.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if j + 1 == steps || b <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                beta.push(b);
                break;
            }
            beta.push(b);
            q.push(w / b);
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = t.symmetric_eigen();
        let (imax, &lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        let s = eig.eigenvectors.column(imax);
        let residual = beta[m - 1] * s[m - 1].abs();
        let mut ritz = DVector::zeros(n);
        for (i, qi) in q.iter().enumerate().take(m) {
            ritz.axpy(s[i], qi, 1.0);
        }
        if lambda <= 0.0 {
            return Ok(0.0);
        }
        if residual <= rel_tol * lambda || m == n || (lambda - last).abs() <= rel_tol * 1e-2 * lambda {
            return Ok(lambda);
        }
        last = lambda;
        start = ritz;
    }
    Err(Error::Eigen(format!("Lanczos did not converge (last estimate {last:e})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_eigen() {
        let n = 40;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let (x, y) = (i as f64, j as f64);
            (-(x - y).powi(2) / 20.0).exp() + if i == j { 0.1 } else { 0.0 }
        });
        let want = a.clone().symmetric_eigen().eigenvalues.max();
        let got = largest_eigenvalue(n, |v| &a * v, 1e-13).unwrap();
        assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn zero_operator() {
        assert_eq!(largest_eigenvalue(5, |v| v * 0.0, 1e-12).unwrap(), 0.0);
    }
}
