//! Banded direct solvers.
//!
//! `BandedLu` performs Gaussian elimination without pivoting. That is safe
//! for the matrices it is used on here (`M + τA(μ)` and its reduced
//! counterpart), whose symmetric part is positive definite, so every leading
//! principal minor is nonzero.

use nalgebra::{DMatrix, DVector};

use super::Operator;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedLu {
    /// Factorizes `Σ cᵢ Aᵢ` for square operators of equal size.
    pub fn factor_sum(terms: &[(f64, &Operator)]) -> Result<Self> {
        let n = terms
            .first()
            .map(|(_, a)| a.nrows())
            .ok_or_else(|| Error::Contract("empty operator sum".into()))?;
        let (mut lower, mut upper) = (0, 0);
        for (_, a) in terms {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Contract("operator sum with mismatched shapes".into()));
            }
            let (l, u) = a.bandwidth();
            lower = lower.max(l);
            upper = upper.max(u);
        }
        let mut lu = BandedLu {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        };
        for (c, a) in terms {
            if *c == 0.0 {
                continue;
            }
            a.for_each_entry(|i, j, v| {
                let k = lu.idx(i, j);
                lu.data[k] += c * v;
            });
        }
        lu.factorize()?;
        Ok(lu)
    }

    pub fn factor(a: &Operator) -> Result<Self> {
        Self::factor_sum(&[(1.0, a)])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if !(pivot.abs() > tiny) {
                return Err(Error::SingularSystem { row: k });
            }
            let imax = (k + self.lower).min(n - 1);
            let jmax = (k + self.upper).min(n - 1);
            for i in k + 1..=imax {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let kj = self.idx(k, j);
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * self.data[kj];
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(self.lower)..i {
                s -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.upper).min(n - 1) {
                s -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b` with the same factors.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.clone();
        // Uᵀ w = b
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(self.upper)..i {
                s -= self.data[self.idx(j, i)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        // Lᵀ x = w
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.lower).min(n - 1) {
                s -= self.data[self.idx(j, i)] * x[j];
            }
            x[i] = s;
        }
        x
    }
}

/// Banded Cholesky `A = L Lᵀ` for symmetric positive definite operators.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    band: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &Operator) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Contract("Cholesky of a non-square operator".into()));
        }
        let n = a.nrows();
        let (l, u) = a.bandwidth();
        let band = l.max(u);
        let mut ch = BandedCholesky {
            n,
            band,
            data: vec![0.0; n * (band + 1)],
        };
        a.for_each_entry(|i, j, v| {
            if j <= i {
                let k = ch.idx(i, j);
                ch.data[k] += v;
            }
        });
        for i in 0..n {
            let j0 = i.saturating_sub(band);
            for j in j0..=i {
                let mut s = ch.data[ch.idx(i, j)];
                for k in j0.max(j.saturating_sub(band))..j {
                    s -= ch.data[ch.idx(i, k)] * ch.data[ch.idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    let k = ch.idx(i, i);
                    ch.data[k] = s.sqrt();
                } else {
                    let k = ch.idx(i, j);
                    ch.data[k] = s / ch.data[ch.idx(j, j)];
                }
            }
        }
        Ok(ch)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.band + 1) + (j + self.band - i)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `L⁻¹ b`
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        for i in 0..self.n {
            let mut s = x[i];
            for j in i.saturating_sub(self.band)..i {
                s -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        x
    }

    /// `L⁻ᵀ b`
    pub fn solve_upper(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = b.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.band).min(n.saturating_sub(1)) {
                s -= self.data[self.idx(j, i)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `L⁻¹ B` column by column.
    pub fn solve_lower_block(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            out.set_column(c, &self.solve_lower(&b.column(c).into_owned()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> Operator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        Operator::from_triplets(n, n, &t)
    }

    #[test]
    fn lu_matches_dense_solve() {
        let a = tridiag(7, -1.3, 4.0, 0.4);
        let lu = BandedLu::factor(&a).unwrap();
        let b = DVector::from_fn(7, |i, _| (i as f64).sin() + 0.5);
        let dense = a.to_dense();
        let x = lu.solve(&b);
        assert!((&dense * &x - &b).norm() < 1e-13);
        let xt = lu.solve_transpose(&b);
        assert!((dense.transpose() * &xt - &b).norm() < 1e-13);
    }

    #[test]
    fn lu_of_sum_and_dense_operator() {
        let a = tridiag(5, -1.0, 2.0, -1.0);
        let n = Operator::Dense(DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { 0.1 * (i as f64 - j as f64) }));
        let lu = BandedLu::factor_sum(&[(1.0, &a), (0.5, &n)]).unwrap();
        let full = a.to_dense() + n.to_dense() * 0.5;
        let b = DVector::from_element(5, 1.0);
        assert!((&full * lu.solve(&b) - &b).norm() < 1e-13);
        assert!((full.transpose() * lu.solve_transpose(&b) - &b).norm() < 1e-13);
    }

    #[test]
    fn singular_is_reported() {
        let a = Operator::Dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(matches!(BandedLu::factor(&a), Err(Error::SingularSystem { row: 0 })));
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = tridiag(6, -1.0, 2.5, -1.0);
        let ch = BandedCholesky::factor(&a).unwrap();
        let b = DVector::from_fn(6, |i, _| 1.0 + i as f64);
        assert!((a.to_dense() * ch.solve(&b) - &b).norm() < 1e-13);
        // ‖L⁻¹ b‖² = bᵀ A⁻¹ b
        let y = ch.solve_lower(&b);
        assert!((y.norm_squared() - b.dot(&ch.solve(&b))).abs() < 1e-12);
        let bad = tridiag(3, -2.0, 1.0, -2.0);
        assert!(matches!(BandedCholesky::factor(&bad), Err(Error::NotPositiveDefinite { .. })));
    }
}
