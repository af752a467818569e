use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Operator;

use super::mesh::{signed_area, Mesh};

/// Axis-aligned square sensor region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorBox {
    pub center: [f64; 2],
    pub side: f64,
}

impl SensorBox {
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let r = 0.5 * self.side;
        (
            [self.center[0] - r, self.center[1] - r],
            [self.center[0] + r, self.center[1] + r],
        )
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

/// The five benchmark sensors of side 0.1.
pub fn default_sensors() -> Vec<SensorBox> {
    [[-0.6, -0.6], [0.6, -0.6], [0.0, 0.0], [-0.6, 0.6], [0.6, 0.6]]
        .into_iter()
        .map(|center| SensorBox { center, side: 0.1 })
        .collect()
}

/// Clips a convex polygon against the half-plane `s·(x_d − c) ≤ 0`.
fn clip(poly: &[[f64; 2]], d: usize, c: f64, s: f64) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| s * (p[d] - c) <= 0.0;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (pin, qin) = (inside(&p), inside(&q));
        if pin {
            out.push(p);
        }
        if pin != qin {
            let t = (c - p[d]) / (q[d] - p[d]);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// `∫_{T ∩ box} λ_i dx` for the three barycentric functions of `T`.
fn clipped_moments(v: &[[f64; 2]; 3], lo: [f64; 2], hi: [f64; 2]) -> [f64; 3] {
    let mut poly = v.to_vec();
    for d in 0..2 {
        poly = clip(&poly, d, lo[d], -1.0);
        poly = clip(&poly, d, hi[d], 1.0);
        if poly.len() < 3 {
            return [0.0; 3];
        }
    }
    let area_t = signed_area(v);
    let bary = |p: [f64; 2]| {
        let l1 = signed_area(&[p, v[1], v[2]]) / area_t;
        let l2 = signed_area(&[v[0], p, v[2]]) / area_t;
        [l1, l2, 1.0 - l1 - l2]
    };
    let mut out = [0.0; 3];
    // fan triangulation; λ_i is linear so the centroid rule is exact
    for k in 1..poly.len() - 1 {
        let sub = [poly[0], poly[k], poly[k + 1]];
        let a = signed_area(&sub);
        if a <= 0.0 {
            continue;
        }
        let g = [(sub[0][0] + sub[1][0] + sub[2][0]) / 3.0, (sub[0][1] + sub[1][1] + sub[2][1]) / 3.0];
        let lam = bary(g);
        for i in 0..3 {
            out[i] += a * lam[i];
        }
    }
    out
}

/// Observation matrix on all mesh nodes: row `i` is the mean over sensor `i`.
pub fn assemble_observation(mesh: &Mesh, sensors: &[SensorBox]) -> Result<Operator> {
    let mut trip = Vec::new();
    for (row, s) in sensors.iter().enumerate() {
        let (lo, hi) = s.bounds();
        if lo[0] < -1.0 || lo[1] < -1.0 || hi[0] > 1.0 || hi[1] > 1.0 || !(s.side > 0.0) {
            return Err(Error::Config(format!("sensor {row} does not lie inside the domain")));
        }
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let v = mesh.vertices(t);
            let xmin = v.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let xmax = v.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let ymin = v.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let ymax = v.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            if xmax <= lo[0] || xmin >= hi[0] || ymax <= lo[1] || ymin >= hi[1] {
                continue;
            }
            let m = clipped_moments(&v, lo, hi);
            for i in 0..3 {
                if m[i] != 0.0 {
                    trip.push((row, tri[i], m[i] / s.area()));
                }
            }
        }
    }
    Ok(Operator::from_triplets(sensors.len(), mesh.num_nodes(), &trip))
}

/// Observation weight `w·I_ℓ`.
pub fn observation_weight(num_sensors: usize, w: f64) -> DMatrix<f64> {
    DMatrix::identity(num_sensors, num_sensors) * w
}

/// Nodal interpolant of `amplitude·exp(−|x − center|²/(2σ²))`, zero on the
/// Dirichlet boundary. Indexed by all mesh nodes.
pub fn gaussian_initial_condition(mesh: &Mesh, center: [f64; 2], sigma: f64, amplitude: f64) -> Result<DVector<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("Gaussian width must be positive, got {sigma}")));
    }
    let mut v = DVector::from_fn(mesh.num_nodes(), |i, _| {
        let p = mesh.nodes[i];
        let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
        amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
    });
    for &d in &mesh.dirichlet_nodes {
        v[d] = 0.0;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_mesh;

    #[test]
    fn means_of_constants_and_linears() {
        for h in [0.08, 0.25, 0.5] {
            let mesh = build_mesh(h).unwrap();
            let c = assemble_observation(&mesh, &default_sensors()).unwrap();
            let ones = DVector::from_element(mesh.num_nodes(), 1.0);
            let out = c.apply(&ones);
            assert!((out - DVector::from_element(5, 1.0)).amax() < 1e-13, "h = {h}");
            let zero = c.apply(&DVector::zeros(mesh.num_nodes()));
            assert_eq!(zero.amax(), 0.0);
            // the mean of a linear function is its value at the box centre
            let lin = DVector::from_fn(mesh.num_nodes(), |i, _| 2.0 * mesh.nodes[i][0] - mesh.nodes[i][1]);
            let out = c.apply(&lin);
            for (i, s) in default_sensors().iter().enumerate() {
                assert!((out[i] - (2.0 * s.center[0] - s.center[1])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sensor_outside_domain_rejected() {
        let mesh = build_mesh(0.5).unwrap();
        let bad = [SensorBox { center: [0.98, 0.0], side: 0.1 }];
        assert!(assemble_observation(&mesh, &bad).is_err());
    }

    #[test]
    fn gaussian_values() {
        let mesh = build_mesh(0.1).unwrap();
        let c = [-0.1, 0.8];
        let g = gaussian_initial_condition(&mesh, c, 0.1, 2.0).unwrap();
        for (i, p) in mesh.nodes.iter().enumerate() {
            let r = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
            if r < 1e-12 {
                assert!((g[i] - 2.0).abs() < 1e-15);
            }
            if (r - 0.1).abs() < 1e-12 {
                assert!((g[i] - 2.0 * (-0.5f64).exp()).abs() < 1e-14);
            }
        }
        assert!(mesh.dirichlet_nodes.iter().all(|&d| g[d] == 0.0));
        assert!(gaussian_initial_condition(&mesh, c, 0.0, 1.0).is_err());
    }
}
