use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Operator;
use crate::time_integration::Trajectory;

/// Dominant POD mode of `snapshots` in the metric `X` (method of
/// snapshots), normalized to `‖ζ‖_X = 1` with its largest-magnitude
/// coefficient positive.
pub fn pod_largest_mode(snapshots: &[DVector<f64>], metric: &Operator) -> Result<DVector<f64>> {
    let k = snapshots.len();
    if k == 0 {
        return Err(Error::DegenerateSnapshots);
    }
    let xs: Vec<DVector<f64>> = snapshots.iter().map(|s| metric.apply(s)).collect();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let g = 0.5 * (snapshots[i].dot(&xs[j]) + snapshots[j].dot(&xs[i]));
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    if !(gram.diagonal().max() > 0.0) {
        return Err(Error::DegenerateSnapshots);
    }
    let eig = gram.symmetric_eigen();
    let imax = eig.eigenvalues.imax();
    let a = eig.eigenvectors.column(imax);
    let mut mode = DVector::zeros(snapshots[0].len());
    for (i, s) in snapshots.iter().enumerate() {
        mode.axpy(a[i], s, 1.0);
    }
    let norm = metric.form(&mode, &mode).max(0.0).sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateSnapshots);
    }
    mode /= norm;
    let pivot = mode.iamax();
    if mode[pivot] < 0.0 {
        mode.neg_mut();
    }
    Ok(mode)
}

/// `v^k − V Vᵀ X v^k` for every entry of the trajectory. An empty basis
/// returns the trajectory unchanged.
pub fn project_error_trajectory(traj: &Trajectory, basis: &[DVector<f64>], metric: &Operator) -> Trajectory {
    Trajectory {
        first_step: traj.first_step,
        values: traj.values.iter().map(|v| projection_error(v, basis, metric)).collect(),
    }
}

pub fn projection_error(v: &DVector<f64>, basis: &[DVector<f64>], metric: &Operator) -> DVector<f64> {
    if basis.is_empty() {
        return v.clone();
    }
    let xv = metric.apply(v);
    let mut e = v.clone();
    for b in basis {
        e.axpy(-b.dot(&xv), b, 1.0);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn single_snapshot_is_normalized() {
        let x = Operator::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 1.0), (2, 2, 4.0)]);
        let v = DVector::from_vec(vec![1.0, -3.0, 0.5]);
        let m = pod_largest_mode(&[v.clone()], &x).unwrap();
        // the largest coefficient −3 must become positive
        let want = -&v / x.form(&v, &v).sqrt();
        assert!((m - want).amax() < 1e-15);
    }

    #[test]
    fn dominant_direction() {
        let id = Operator::identity(3);
        let m = pod_largest_mode(&[e(3, 0), e(3, 0), e(3, 1)], &id).unwrap();
        assert!((m - e(3, 0)).amax() < 1e-15);
    }

    #[test]
    fn zero_snapshots_are_degenerate() {
        let id = Operator::identity(2);
        assert!(matches!(
            pod_largest_mode(&[DVector::zeros(2), DVector::zeros(2)], &id),
            Err(Error::DegenerateSnapshots)
        ));
        assert!(matches!(pod_largest_mode(&[], &id), Err(Error::DegenerateSnapshots)));
    }

    #[test]
    fn projection_properties() {
        let id = Operator::identity(3);
        let traj = Trajectory {
            first_step: 0,
            values: vec![DVector::from_vec(vec![1.0, 2.0, 3.0]), e(3, 0) * 4.0],
        };
        assert_eq!(project_error_trajectory(&traj, &[], &id), traj);
        let basis = [e(3, 0)];
        let err = project_error_trajectory(&traj, &basis, &id);
        assert_eq!(err.values[1].amax(), 0.0);
        let again = project_error_trajectory(&err, &basis, &id);
        assert!((again.values[0].clone() - &err.values[0]).amax() < 1e-15);
    }
}
