//! POD-Greedy construction of the reduced spaces.

use std::collections::HashMap;
use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certification::Constants;
use crate::control::Variant;
use crate::error::{Error, Result};
use crate::model::{check_domain, ControlSpace, FullOrderModel};
use crate::optimizer::{solve_4dvar, AssimilationResult, SolveOptions};
use crate::time_integration::{ObservationData, Trajectory};

use super::pod::{pod_largest_mode, project_error_trajectory};
use super::rom::ReducedOrderModel;
use super::{BasisDims, ReducedBasis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub variant: Variant,
    pub train: Vec<f64>,
    pub mu_start: f64,
    pub n_max: usize,
    /// Stop once the largest relative bound over `train` is at most this.
    pub tol: f64,
    /// Initial-condition snapshots whose `X_U`-complement is at most this
    /// fraction of their norm are discarded.
    pub dependence_tol: f64,
    pub solve: SolveOptions,
}

impl GreedyConfig {
    pub fn validate(&self, fom: &FullOrderModel) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        for &mu in self.train.iter().chain(std::iter::once(&self.mu_start)) {
            check_domain(fom.mu_domain, mu)?;
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("greedy tolerance must be positive".into()));
        }
        if !(self.dependence_tol > 0.0 && self.dependence_tol < 1.0) {
            return Err(Error::Config("dependence tolerance must lie in (0,1)".into()));
        }
        self.solve.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyIteration {
    pub n: usize,
    /// Parameter whose full solution enriched the spaces.
    pub mu: f64,
    /// Largest relative bound over the training set after enrichment.
    pub max_rel_bound: f64,
    /// Its arg max, the next parameter to sample.
    pub next_mu: f64,
    pub dims: BasisDims,
    /// Whether the initial-condition snapshot was discarded as dependent.
    pub discarded_initial: bool,
    /// Not serialized, so stored models are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub iterations: Vec<GreedyIteration>,
}

pub fn greedy_strong(
    fom: &FullOrderModel,
    data: &ObservationData,
    constants: &Constants,
    cfg: &GreedyConfig,
) -> Result<(ReducedOrderModel, GreedyTrace)> {
    expect_variant(cfg, Variant::Strong)?;
    greedy(fom, data, constants, cfg)
}

pub fn greedy_weak(
    fom: &FullOrderModel,
    data: &ObservationData,
    constants: &Constants,
    cfg: &GreedyConfig,
) -> Result<(ReducedOrderModel, GreedyTrace)> {
    expect_variant(cfg, Variant::Weak)?;
    greedy(fom, data, constants, cfg)
}

pub fn greedy_combined(
    fom: &FullOrderModel,
    data: &ObservationData,
    constants: &Constants,
    cfg: &GreedyConfig,
) -> Result<(ReducedOrderModel, GreedyTrace)> {
    expect_variant(cfg, Variant::Combined)?;
    greedy(fom, data, constants, cfg)
}

fn expect_variant(cfg: &GreedyConfig, v: Variant) -> Result<()> {
    if cfg.variant != v {
        return Err(Error::Contract(format!("greedy for {v} called with a {} configuration", cfg.variant)));
    }
    Ok(())
}

/// Relative bound `Δ/‖u_N‖` at every training parameter, in order.
pub fn training_bounds(rom: &ReducedOrderModel, train: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    train
        .par_iter()
        .map(|&mu| {
            let sol = rom.solve(mu, opts)?;
            let (_, cert) = rom.certify(&sol)?;
            let norm = rom.control_norm(&sol.control);
            Ok(if norm > 0.0 { cert.delta / norm } else { cert.delta })
        })
        .collect()
}

/// Index of the largest value; the first one wins ties.
fn arg_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || (v.is_nan() && !values[best].is_nan()) {
            best = i;
        }
    }
    best
}

/// Runs POD-Greedy for `cfg.variant` and returns the final reduced model.
pub fn greedy(
    fom: &FullOrderModel,
    data: &ObservationData,
    constants: &Constants,
    cfg: &GreedyConfig,
) -> Result<(ReducedOrderModel, GreedyTrace)> {
    cfg.validate(fom)?;
    let variant = cfg.variant;
    data.validate(&fom.model, variant)?;
    let full = &fom.model;
    let parts = full.parts();
    let xy = &parts.state_metric;

    let mut basis = ReducedBasis::empty(variant);
    if variant == Variant::Weak {
        let y0 = data.y0.as_ref().expect("validated");
        if !ReducedBasis::append(&mut basis.state, xy, y0, 0.0) {
            return Err(Error::Contract("weak variant needs a nonzero initial state".into()));
        }
    }
    basis.start_dims = basis.dims();

    let mut cache: HashMap<u64, AssimilationResult> = HashMap::new();
    let mut trace = GreedyTrace::default();
    let mut mu_star = cfg.mu_start;
    let mut rel = f64::INFINITY;
    let mut rom = None;
    let mut n = 0;
    while n < cfg.n_max && rel > cfg.tol {
        n += 1;
        let start = Instant::now();
        let sol = match cache.entry(mu_star.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(solve_4dvar(full, mu_star, data, variant, &cfg.solve)?)
            }
        };

        let states = Trajectory {
            first_step: 1,
            values: sol.state.values[1..].to_vec(),
        };
        let ey = project_error_trajectory(&states, &basis.state, xy);
        enrich_pod(&mut basis.state, xy, &ey.values, "state", n);
        let adjoints = Trajectory {
            first_step: 1,
            values: sol.adjoint.values[..full.num_steps()].to_vec(),
        };
        let ep = project_error_trajectory(&adjoints, &basis.state, xy);
        enrich_pod(&mut basis.state, xy, &ep.values, "adjoint", n);

        let mut discarded_initial = false;
        if let Some(u0) = sol.control.initial() {
            let x = full.control_metric(ControlSpace::Initial);
            if !ReducedBasis::append(&mut basis.initial, x, u0, cfg.dependence_tol) {
                info!("iteration {n}: initial-condition snapshot at mu = {mu_star} is dependent, discarded");
                discarded_initial = true;
            }
        }
        if let Some(u) = sol.control.forcing() {
            let x = full.control_metric(ControlSpace::Forcing);
            let eu: Vec<DVector<f64>> = u.iter().map(|v| super::pod::projection_error(v, &basis.forcing, x)).collect();
            enrich_pod(&mut basis.forcing, x, &eu, "forcing", n);
        }
        basis.history.push(basis.dims());

        let current = ReducedOrderModel::build(fom, basis.clone(), data, *constants)?;
        let bounds = training_bounds(&current, &cfg.train, &cfg.solve)?;
        let best = arg_max(&bounds);
        rel = bounds[best];
        if !rel.is_finite() {
            return Err(Error::NonFinite { mu: cfg.train[best] });
        }
        let dims = basis.dims();
        info!(
            "{variant} greedy N = {n}: mu* = {mu_star}, dims = ({}, {}, {}), max relative bound = {rel:.3e} at mu = {}",
            dims.state, dims.initial, dims.forcing, cfg.train[best]
        );
        trace.iterations.push(GreedyIteration {
            n,
            mu: mu_star,
            max_rel_bound: rel,
            next_mu: cfg.train[best],
            dims,
            discarded_initial,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        mu_star = cfg.train[best];
        rom = Some(current);
    }
    let rom = match rom {
        Some(r) => r,
        None => return Err(Error::Config("greedy needs n_max ≥ 1".into())),
    };
    Ok((rom, trace))
}

fn enrich_pod(basis: &mut Vec<DVector<f64>>, metric: &crate::linalg::Operator, errors: &[DVector<f64>], what: &str, n: usize) {
    match pod_largest_mode(errors, metric) {
        Ok(mode) => {
            if !ReducedBasis::append(basis, metric, &mode, 1e-10) {
                warn!("iteration {n}: {what} POD mode lies in the current space, not added");
            }
        }
        Err(Error::DegenerateSnapshots) => {
            debug!("iteration {n}: {what} projection errors vanish, nothing added");
        }
        Err(e) => warn!("iteration {n}: {what} POD failed: {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arg_max_prefers_first() {
        assert_eq!(arg_max(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(arg_max(&[5.0]), 0);
    }
}
