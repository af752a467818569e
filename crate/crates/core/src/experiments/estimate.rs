//! Parameter estimation by minimizing the optimal 4D-Var cost over `μ`.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ReducedOrderModel;
use crate::control::Variant;
use crate::error::{Error, Result};
use crate::model::FullOrderModel;
use crate::optimizer::{solve_4dvar, SolveOptions};
use crate::time_integration::ObservationData;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Brent's derivative-free minimization on `[a, b]`: golden section with
/// parabolic interpolation. Stops when the bracket around the current best
/// point is within `2(√ε|x| + tol/3)`.
pub fn brent_minimize<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a < b) || !(tol > 0.0) {
        return Err(Error::Config(format!("invalid minimization interval [{a}, {b}] or tolerance {tol}")));
    }
    let mut eval = |x: f64, count: &mut usize| -> Result<f64> {
        *count += 1;
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { mu: x });
        }
        Ok(v)
    };
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (a, b);
    let mut count = 0;
    let mut x = a + golden * (b - a);
    let (mut v, mut w) = (x, x);
    let mut fx = eval(x, &mut count)?;
    let (mut fv, mut fw) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    loop {
        let xm = 0.5 * (a + b);
        let tol1 = eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= xm { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = eval(u, &mut count)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok(Minimum { x, fx, evaluations: count })
}

/// Minimizes `cost` over the parameter domain: the grid minimizer of
/// `grid_values` selects a bracket of neighbouring grid points, refined by
/// Brent's method.
pub fn estimate_parameter<F>(cost: F, grid: &[f64], grid_values: &[f64], tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid.len() < 2 || grid.len() != grid_values.len() {
        return Err(Error::Contract("estimation needs at least two grid points with values".into()));
    }
    if let Some(i) = grid_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { mu: grid[i] });
    }
    let i = grid_values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < grid_values[best] { i } else { best });
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let mut m = brent_minimize(cost, lo, hi, tol)?;
    // The bracket interior may not beat the grid point itself.
    if grid_values[i] < m.fx {
        m.x = grid[i];
        m.fx = grid_values[i];
    }
    Ok(m)
}

/// Optimal cost `J*(μ)` of the full model at every parameter, in order.
pub fn full_costs(fom: &FullOrderModel, data: &ObservationData, variant: Variant, mus: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    mus.par_iter()
        .map(|&mu| {
            fom.check_mu(mu)?;
            Ok(solve_4dvar(&fom.model, mu, data, variant, opts)?.cost)
        })
        .collect()
}

pub fn reduced_costs(rom: &ReducedOrderModel, mus: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    mus.par_iter().map(|&mu| Ok(rom.solve(mu, opts)?.cost)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterErrorRow {
    pub n: usize,
    pub mu_star_n: f64,
    pub cost_n: f64,
    /// `|μ* − μ_N*| / |μ*|`.
    pub e_mu: f64,
    /// `max_μ |J*(μ) − J_N*(μ)| / |J*(μ)|` over the grid.
    pub e_j_max: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterErrorTable {
    pub variant: Variant,
    pub grid: Vec<f64>,
    pub full_costs: Vec<f64>,
    pub mu_star: f64,
    pub cost_star: f64,
    pub evaluations: usize,
    pub rows: Vec<OuterErrorRow>,
}

/// Compares full and reduced parameter estimation for each `N` in `n_list`.
pub fn outer_error_table(
    fom: &FullOrderModel,
    data: &ObservationData,
    rom: &ReducedOrderModel,
    n_list: &[usize],
    grid: &[f64],
    opts: &SolveOptions,
    tol: f64,
) -> Result<OuterErrorTable> {
    let variant = rom.variant;
    let full = full_costs(fom, data, variant, grid, opts)?;
    let est = estimate_parameter(
        |mu| Ok(solve_4dvar(&fom.model, mu, data, variant, opts)?.cost),
        grid,
        &full,
        tol,
    )?;
    info!("{variant}: full estimate mu* = {:.8} after {} evaluations", est.x, est.evaluations);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let rom_n = rom.truncated(fom, data, n)?;
        let red = reduced_costs(&rom_n, grid, opts)?;
        let e_j_max = full
            .iter()
            .zip(&red)
            .map(|(j, jn)| (j - jn).abs() / j.abs())
            .fold(0.0, f64::max);
        let m = estimate_parameter(|mu| Ok(rom_n.solve(mu, opts)?.cost), grid, &red, tol)?;
        let e_mu = (est.x - m.x).abs() / est.x.abs();
        info!("{variant} N = {n}: mu_N* = {:.8}, e_mu = {e_mu:.3e}, e_J = {e_j_max:.3e}", m.x);
        rows.push(OuterErrorRow {
            n,
            mu_star_n: m.x,
            cost_n: m.fx,
            e_mu,
            e_j_max,
            evaluations: m.evaluations,
        });
    }
    Ok(OuterErrorTable {
        variant,
        grid: grid.to_vec(),
        full_costs: full,
        mu_star: est.x,
        cost_star: est.fx,
        evaluations: est.evaluations,
        rows,
    })
}
