//! Preconditioned conjugate gradients on the reduced 4D-Var cost.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::control::{Control, ControlInnerProduct, Variant};
use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::time_integration::{ObservationData, Problem, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative tolerance on the preconditioned residual norm.
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    pub record_iterations: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            cg_rel_tol: 1e-10,
            cg_max_iter: 10_000,
            record_iterations: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) {
            return Err(Error::Config(format!("cg_rel_tol must lie in (0,1), got {}", self.cg_rel_tol)));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::Config("cg_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// One CG iteration record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `(rᵀ G⁻¹ r)^{1/2}` after the iteration.
    pub residual: f64,
    /// Quadratic model `j(u) − j(0)`.
    pub model_decrease: f64,
}

#[derive(Clone, Debug)]
pub struct AssimilationResult {
    pub mu: f64,
    pub control: Control,
    pub state: Trajectory,
    pub adjoint: Trajectory,
    pub cost: f64,
    pub cg_iterations: usize,
    /// Preconditioned residual norm of the initial gradient.
    pub initial_residual: f64,
    pub final_residual: f64,
    pub iterations: Vec<IterationRecord>,
    pub wall_time_ms: f64,
}

/// Solves the 4D-Var problem of `variant` at parameter `mu`.
///
/// The reduced cost is quadratic, so one Newton step from `u = 0` solves
/// `H u = −∇j(0)`; CG runs in the control metric, which is also the
/// preconditioner.
pub fn solve_4dvar(
    model: &DiscreteModel,
    mu: f64,
    data: &ObservationData,
    variant: Variant,
    opts: &SolveOptions,
) -> Result<AssimilationResult> {
    opts.validate()?;
    let start = Instant::now();
    let problem = Problem::new(model, mu, data, variant)?;
    let ip = ControlInnerProduct::new(model);

    let mut u = Control::zeros_for(model, variant);
    let b = problem.gradient(&u)?.scaled(-1.0);
    let mut r = b.clone();
    let mut z = ip.solve(&r);
    let mut rz = r.dot(&z);
    let r0 = rz.max(0.0).sqrt();
    let target = opts.cg_rel_tol * r0;
    let mut d = z.clone();
    let mut history = vec![r0];
    let mut iterations = Vec::new();
    let mut iter = 0;
    let mut res = r0;
    while res > target {
        if iter == opts.cg_max_iter {
            return Err(Error::NonConvergence {
                iterations: iter,
                last: res,
                history,
            });
        }
        let hd = problem.hessian_apply(&d)?;
        let dhd = d.dot(&hd);
        if !(dhd > 0.0) {
            return Err(Error::Contract(format!("Hessian is not positive definite (dᵀHd = {dhd:e})")));
        }
        let alpha = rz / dhd;
        u.axpy(alpha, &d);
        r.axpy(-alpha, &hd);
        z = ip.solve(&r);
        let rz_new = r.dot(&z);
        res = rz_new.max(0.0).sqrt();
        iter += 1;
        history.push(res);
        if opts.record_iterations {
            let mut bpr = b.clone();
            bpr.axpy(1.0, &r);
            iterations.push(IterationRecord {
                iteration: iter,
                residual: res,
                model_decrease: -0.5 * u.dot(&bpr),
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        d.scale(beta);
        d.axpy(1.0, &z);
    }
    if !u.is_finite() {
        return Err(Error::NonFinite { mu });
    }
    let state = problem.solve_state(&u)?;
    let adjoint = problem.solve_adjoint(&state)?;
    let cost = problem.cost_with_state(&u, &state);
    Ok(AssimilationResult {
        mu,
        control: u,
        state,
        adjoint,
        cost,
        cg_iterations: iter,
        initial_residual: r0,
        final_residual: res,
        iterations,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Largest dual-norm residual of the optimality system at `result`:
/// time-aggregated state and adjoint residuals and the gradient norm.
pub fn optimality_residual(model: &DiscreteModel, data: &ObservationData, result: &AssimilationResult) -> Result<f64> {
    let variant = result.control.variant();
    let problem = Problem::new(model, result.mu, data, variant)?;
    let tau = model.tau();
    let agg = |rs: &[nalgebra::DVector<f64>]| {
        (tau * rs.iter().map(|r| model.state_dual_norm(r).powi(2)).sum::<f64>()).sqrt()
    };
    let ry = agg(&problem.state_residuals(&result.control, &result.state)?);
    let rp = agg(&problem.adjoint_residuals(&result.state, &result.adjoint));
    let g = problem.gradient_from(&result.control, &result.adjoint);
    let ru = ControlInnerProduct::new(model).dual_norm(&g);
    Ok(ry.max(rp).max(ru))
}

/// Writes the iteration log as `iteration,residual,model_decrease`.
pub fn write_iterations_csv<W: std::io::Write>(result: &AssimilationResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "residual", "model_decrease"])?;
    w.write_record(["0".to_string(), format!("{:.16e}", result.initial_residual), format!("{:.16e}", 0.0)])?;
    for rec in &result.iterations {
        w.write_record([
            rec.iteration.to_string(),
            format!("{:.16e}", rec.residual),
            format!("{:.16e}", rec.model_decrease),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::toy;
    use nalgebra::DVector;

    #[test]
    fn scalar_closed_form_optimum() {
        // K = 1: j(u) = ½(u − ud)² + τ/2 d (c y¹ − z)², y¹ = u/(1+τa)
        let (a, c, d, tau, z, ud) = (2.0, 1.5, 3.0, 0.5, 0.8, 0.1);
        let m = toy::scalar(a, 0.0, 1.0, c, d, tau, 1);
        let data = ObservationData {
            z_d: vec![DVector::from_element(1, z)],
            u_d0: Some(DVector::from_element(1, ud)),
            u_d: None,
            y0: None,
            prior_offset: 0.0,
        };
        let s = c / (1.0 + tau * a);
        let want = (ud + tau * d * s * z) / (1.0 + tau * d * s * s);
        let res = solve_4dvar(&m, 1.0, &data, Variant::Strong, &SolveOptions::default()).unwrap();
        assert!((res.control.initial().unwrap()[0] - want).abs() < 1e-14);
        assert_eq!(res.cg_iterations, 1);
        assert!(optimality_residual(&m, &data, &res).unwrap() < 1e-14);
    }

    #[test]
    fn non_convergence_carries_history() {
        let m = toy::convection_diffusion_1d(12, 0.05, 6);
        let data = ObservationData {
            z_d: (0..6).map(|k| DVector::from_element(4, 0.1 * k as f64 + 0.3)).collect(),
            u_d0: Some(DVector::zeros(12)),
            u_d: None,
            y0: None,
            prior_offset: 0.0,
        };
        let opts = SolveOptions {
            cg_max_iter: 1,
            cg_rel_tol: 1e-14,
            record_iterations: false,
        };
        match solve_4dvar(&m, 5.0, &data, Variant::Strong, &opts) {
            Err(Error::NonConvergence { iterations, history, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(history.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quadratic_model_decreases() {
        let m = toy::convection_diffusion_1d(15, 0.05, 8);
        let data = ObservationData {
            z_d: (0..8).map(|k| DVector::from_fn(5, |i, _| ((i + k) as f64).sin())).collect(),
            u_d0: Some(DVector::zeros(15)),
            u_d: None,
            y0: Some(DVector::from_element(15, 0.2)),
            prior_offset: 0.0,
        };
        for v in Variant::ALL {
            let opts = SolveOptions {
                record_iterations: true,
                ..SolveOptions::default()
            };
            let res = solve_4dvar(&m, 5.0, &data, v, &opts).unwrap();
            let q: Vec<f64> = res.iterations.iter().map(|r| r.model_decrease).collect();
            assert!(q.windows(2).all(|w| w[1] <= w[0] + 1e-14 * w[0].abs()), "{v}: {q:?}");
            let j0 = Problem::new(&m, 5.0, &data, v).unwrap().cost(&Control::zeros_for(&m, v)).unwrap();
            assert!((j0 + q.last().unwrap() - res.cost).abs() < 1e-10 * j0);
            assert!(optimality_residual(&m, &data, &res).unwrap() < 1e-8);
        }
    }

    #[test]
    fn invalid_options_rejected() {
        let opts = SolveOptions {
            cg_rel_tol: 1.5,
            ..SolveOptions::default()
        };
        assert!(matches!(opts.validate(), Err(Error::Config(_))));
    }
}
