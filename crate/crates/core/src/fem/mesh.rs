use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structured triangulation of `(−1,1)²`.
///
/// Node `(i, j)` sits at `(−1 + i·h, −1 + j·h)` with index `j·(n+1) + i`.
/// Every grid square is split along its lower-left to upper-right diagonal.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Nodes on the lower boundary `x₂ = −1`.
    pub dirichlet_nodes: Vec<usize>,
    pub h: f64,
}

/// Builds the structured mesh with element size `h`; `2/h` must be a
/// positive integer.
pub fn build_mesh(h: f64) -> Result<Mesh> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("mesh size must be positive, got {h}")));
    }
    let ratio = 2.0 / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Config(format!("mesh size {h} does not divide the domain width 2")));
    }
    let n = n as usize;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let dirichlet_nodes = (0..=n).map(|i| idx(i, 0)).collect();
    Ok(Mesh {
        nodes,
        triangles,
        dirichlet_nodes,
        h: 2.0 / n as f64,
    })
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise order).
    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices(t))
    }

    /// Node indices not on the Dirichlet boundary, ascending.
    pub fn free_nodes(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.num_nodes()];
        for &d in &self.dirichlet_nodes {
            fixed[d] = true;
        }
        (0..self.num_nodes()).filter(|&i| !fixed[i]).collect()
    }

    /// Checks the geometric and topological invariants of the mesh.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Assembly(msg));
        for (i, p) in self.nodes.iter().enumerate() {
            if p.iter().any(|v| !(v.abs() <= 1.0 + 1e-12)) {
                return bad(format!("node {i} lies outside the domain"));
            }
        }
        for t in 0..self.triangles.len() {
            if self.triangles[t].iter().any(|&v| v >= self.num_nodes()) {
                return bad(format!("triangle {t} references a missing node"));
            }
            if !(self.signed_area(t) > 0.0) {
                return bad(format!("triangle {t} has non-positive area"));
            }
        }
        let expected: Vec<usize> = (0..self.num_nodes())
            .filter(|&i| (self.nodes[i][1] + 1.0).abs() <= 1e-12)
            .collect();
        let mut got = self.dirichlet_nodes.clone();
        got.sort_unstable();
        if got != expected {
            return bad("Dirichlet nodes do not match the lower boundary".into());
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            let on_boundary = |p: [f64; 2], q: [f64; 2]| {
                (0..2).any(|d| (p[d].abs() - 1.0).abs() <= 1e-12 && (p[d] - q[d]).abs() <= 1e-12)
            };
            let want = if on_boundary(self.nodes[a], self.nodes[b]) { 1 } else { 2 };
            if count != want {
                return bad(format!("edge ({a},{b}) is shared by {count} triangles"));
            }
        }
        Ok(())
    }
}

pub(crate) fn signed_area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}
