//! Linear algebra plumbing shared by the full- and reduced-order solvers.
//!
//! Operators are stored either as CSR matrices (finite element level) or as
//! dense matrices (reduced level). Both are factorized through the banded
//! kernels in [`banded`], which treat a dense matrix as a matrix with full
//! bandwidth.

pub mod banded;
pub mod eigen;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

pub use banded::{BandedCholesky, BandedLu};

/// A linear operator in either sparse or dense storage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Operator {
    Sparse(CsrMatrix<f64>),
    Dense(DMatrix<f64>),
}

impl Operator {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut coo = CooMatrix::new(nrows, ncols);
        for &(i, j, v) in triplets {
            coo.push(i, j, v);
        }
        Operator::Sparse(CsrMatrix::from(&coo))
    }

    pub fn identity(n: usize) -> Self {
        Operator::Dense(DMatrix::identity(n, n))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Operator::Dense(DMatrix::zeros(nrows, ncols))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.nrows(),
            Operator::Dense(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.ncols(),
            Operator::Dense(m) => m.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Operator::Sparse(_))
    }

    /// `y = A x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols(), "operator/vector dimension mismatch");
        match self {
            Operator::Sparse(m) => {
                let mut y = DVector::zeros(m.nrows());
                for (i, row) in m.row_iter().enumerate() {
                    let mut s = 0.0;
                    for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                        s += v * x[j];
                    }
                    y[i] = s;
                }
                y
            }
            Operator::Dense(m) => m * x,
        }
    }

    /// `y = Aᵀ x`
    pub fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows(), "operator/vector dimension mismatch");
        match self {
            Operator::Sparse(m) => {
                let mut y = DVector::zeros(m.ncols());
                for (i, row) in m.row_iter().enumerate() {
                    let xi = x[i];
                    if xi == 0.0 {
                        continue;
                    }
                    for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                        y[j] += v * xi;
                    }
                }
                y
            }
            Operator::Dense(m) => m.tr_mul(x),
        }
    }

    /// `A V` for a dense block `V`.
    pub fn apply_block(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m * v,
            Operator::Sparse(_) => {
                let mut out = DMatrix::zeros(self.nrows(), v.ncols());
                for c in 0..v.ncols() {
                    let col = self.apply(&v.column(c).into_owned());
                    out.set_column(c, &col);
                }
                out
            }
        }
    }

    /// `Aᵀ V` for a dense block `V`.
    pub fn apply_transpose_block(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m.tr_mul(v),
            Operator::Sparse(_) => {
                let mut out = DMatrix::zeros(self.ncols(), v.ncols());
                for c in 0..v.ncols() {
                    let col = self.apply_transpose(&v.column(c).into_owned());
                    out.set_column(c, &col);
                }
                out
            }
        }
    }

    /// Galerkin projection `Wᵀ A V`.
    pub fn project(&self, w: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        w.tr_mul(&self.apply_block(v))
    }

    /// Bilinear form `yᵀ A x`.
    pub fn form(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        y.dot(&self.apply(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Sparse(m) => {
                let mut d = DMatrix::zeros(m.nrows(), m.ncols());
                for (i, j, v) in m.triplet_iter() {
                    d[(i, j)] += *v;
                }
                d
            }
        }
    }

    /// Visits every stored entry as `(row, col, value)`.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        match self {
            Operator::Sparse(m) => {
                for (i, j, v) in m.triplet_iter() {
                    f(i, j, *v);
                }
            }
            Operator::Dense(m) => {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            f(i, j, v);
                        }
                    }
                }
            }
        }
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        self.for_each_entry(|i, j, _| {
            if i > j {
                lower = lower.max(i - j);
            } else {
                upper = upper.max(j - i);
            }
        });
        (lower, upper)
    }

    /// Restriction `Aᵣ = A[rows, cols]` keeping the given index sets in order.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Operator {
        let mut row_map = vec![usize::MAX; self.nrows()];
        for (new, &old) in rows.iter().enumerate() {
            row_map[old] = new;
        }
        let mut col_map = vec![usize::MAX; self.ncols()];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut triplets = Vec::new();
        self.for_each_entry(|i, j, v| {
            let (ri, cj) = (row_map[i], col_map[j]);
            if ri != usize::MAX && cj != usize::MAX {
                triplets.push((ri, cj, v));
            }
        });
        match self {
            Operator::Sparse(_) => Operator::from_triplets(rows.len(), cols.len(), &triplets),
            Operator::Dense(_) => {
                let mut d = DMatrix::zeros(rows.len(), cols.len());
                for (i, j, v) in triplets {
                    d[(i, j)] += v;
                }
                Operator::Dense(d)
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Operator {
        match self {
            Operator::Sparse(m) => {
                let mut m = m.clone();
                for v in m.values_mut() {
                    *v *= s;
                }
                Operator::Sparse(m)
            }
            Operator::Dense(m) => Operator::Dense(m * s),
        }
    }
}

/// Projects `v` onto the `metric`-orthogonal complement of the columns of
/// `basis` (assumed metric-orthonormal) with two passes of classical
/// Gram-Schmidt. Returns the projected vector.
pub fn orthogonalize(basis: &[DVector<f64>], metric: &Operator, v: &DVector<f64>) -> DVector<f64> {
    let mut w = v.clone();
    for _ in 0..2 {
        let mw = metric.apply(&w);
        let coeffs: Vec<f64> = basis.iter().map(|b| b.dot(&mw)).collect();
        for (b, c) in basis.iter().zip(coeffs) {
            w.axpy(-c, b, 1.0);
        }
    }
    w
}

pub fn metric_norm(metric: &Operator, v: &DVector<f64>) -> f64 {
    metric.form(v, v).max(0.0).sqrt()
}

/// Stacks column vectors into a matrix (`n × 0` when the list is empty).
pub fn columns_to_matrix(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Operator {
        Operator::from_triplets(3, 3, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 1, 4.0), (2, 2, 5.0), (2, 2, 1.0)])
    }

    #[test]
    fn sparse_and_dense_agree() {
        let a = sample();
        let d = Operator::Dense(a.to_dense());
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!((a.apply(&x) - d.apply(&x)).norm() < 1e-15);
        assert!((a.apply_transpose(&x) - d.apply_transpose(&x)).norm() < 1e-15);
        assert_eq!(a.to_dense()[(2, 2)], 6.0);
        assert_eq!(a.bandwidth(), (1, 1));
    }

    #[test]
    fn restriction_keeps_order() {
        let a = sample();
        let r = a.restrict(&[1, 2], &[1, 2]).to_dense();
        assert_eq!(r[(0, 0)], 3.0);
        assert_eq!(r[(1, 0)], 4.0);
        assert_eq!(r[(1, 1)], 6.0);
    }

    #[test]
    fn gram_schmidt_in_metric() {
        let m = Operator::Dense(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5,1.0]));
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let b0 = &e1 / metric_norm(&m, &e1);
        let w = orthogonalize(&[b0.clone()], &m, &DVector::from_vec(vec![0.3, 1.0]));
        assert!(m.form(&b0, &w).abs() < 1e-15);
    }
}
