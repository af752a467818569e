use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Operator;

use super::mesh::{signed_area, Mesh};

/// Taylor-Green vortex velocity `β(x) = (sin πx₁ cos πx₂, −cos πx₁ sin πx₂)`.
pub fn taylor_green(x: [f64; 2]) -> [f64; 2] {
    let (s1, c1) = (PI * x[0]).sin_cos();
    let (s2, c2) = (PI * x[1]).sin_cos();
    [s1 * c2, -c1 * s2]
}

/// Barycentric coordinates of the interior 3-point Gauss rule (degree 2).
const GAUSS3: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// P1 finite element matrices on all mesh nodes (no boundary conditions).
#[derive(Clone, Debug)]
pub struct FemOperators {
    pub mass: Operator,
    /// `∫∇w·∇v`
    pub diffusion: Operator,
    /// Skew-symmetric form of `∫(β·∇w)v`.
    pub convection: Operator,
}

struct Element {
    area: f64,
    mass: [[f64; 3]; 3],
    diffusion: [[f64; 3]; 3],
    convection: [[f64; 3]; 3],
}

fn element(v: &[[f64; 2]; 3], beta: &impl Fn([f64; 2]) -> [f64; 2]) -> Option<Element> {
    let area = signed_area(v);
    if !(area > 0.0) {
        return None;
    }
    // ∇λ_i = (y_j − y_k, x_k − x_j) / 2|T| with (i,j,k) cyclic
    let mut grad = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        grad[i] = [(v[j][1] - v[k][1]) / (2.0 * area), (v[k][0] - v[j][0]) / (2.0 * area)];
    }
    let mut mass = [[0.0; 3]; 3];
    let mut diffusion = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            mass[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
            diffusion[i][j] = area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
        }
    }
    // raw[i][j] = ∫ (β·∇λ_j) λ_i, test function index first
    let mut raw = [[0.0; 3]; 3];
    for lam in &GAUSS3 {
        let x = [
            lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0],
            lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1],
        ];
        let b = beta(x);
        for j in 0..3 {
            let adv = b[0] * grad[j][0] + b[1] * grad[j][1];
            for i in 0..3 {
                raw[i][j] += area / 3.0 * adv * lam[i];
            }
        }
    }
    let mut convection = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            convection[i][j] = 0.5 * (raw[i][j] - raw[j][i]);
        }
    }
    Some(Element {
        area,
        mass,
        diffusion,
        convection,
    })
}

fn for_each_element(mesh: &Mesh, mut f: impl FnMut(&[usize; 3], &Element)) -> Result<()> {
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let e = element(&mesh.vertices(t), &taylor_green)
            .ok_or_else(|| Error::Assembly(format!("triangle {t} is degenerate")))?;
        debug_assert!(e.area > 0.0);
        f(tri, &e);
    }
    Ok(())
}

/// Assembles mass, diffusion and convection matrices on all nodes.
pub fn assemble_operators(mesh: &Mesh) -> Result<FemOperators> {
    let n = mesh.num_nodes();
    let (mut m, mut k, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for_each_element(mesh, |tri, e| {
        for i in 0..3 {
            for j in 0..3 {
                m.push((tri[i], tri[j], e.mass[i][j]));
                k.push((tri[i], tri[j], e.diffusion[i][j]));
                c.push((tri[i], tri[j], e.convection[i][j]));
            }
        }
    })?;
    Ok(FemOperators {
        mass: Operator::from_triplets(n, n, &m),
        diffusion: Operator::from_triplets(n, n, &k),
        convection: Operator::from_triplets(n, n, &c),
    })
}

/// Assembles `a(·,·;μ)` in one pass with the coefficient applied per
/// element, independently of the affine decomposition.
pub fn assemble_direct(mesh: &Mesh, mu: f64) -> Result<Operator> {
    let n = mesh.num_nodes();
    let mut a = Vec::new();
    for_each_element(mesh, |tri, e| {
        for i in 0..3 {
            for j in 0..3 {
                a.push((tri[i], tri[j], e.diffusion[i][j] / mu + e.convection[i][j]));
            }
        }
    })?;
    Ok(Operator::from_triplets(n, n, &a))
}
