use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigen::largest_eigenvalue;
use crate::model::{check_domain, ControlSpace, DiscreteModel, FullOrderModel};

/// Parameter-independent constants of the bounds plus the min-theta
/// coercivity lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub mu_ref: f64,
    pub mu_domain: (f64, f64),
}

impl Constants {
    pub fn compute(fom: &FullOrderModel) -> Result<Self> {
        Ok(Constants {
            gamma_b: compute_gamma_b(&fom.model)?,
            gamma_c: compute_gamma_c(&fom.model)?,
            mu_ref: fom.mu_ref,
            mu_domain: fom.mu_domain,
        })
    }

    pub fn alpha_lb(&self, mu: f64) -> Result<f64> {
        coercivity_lower_bound(mu, self.mu_ref, self.mu_domain)
    }
}

/// `α_LB(μ) = μ_ref/μ`, valid when `X_Y = K/μ_ref` and the convection part
/// of `A` is skew-symmetric.
pub fn coercivity_lower_bound(mu: f64, mu_ref: f64, domain: (f64, f64)) -> Result<f64> {
    check_domain(domain, mu)?;
    Ok(mu_ref / mu)
}

/// `γ_c = λ_max(CᵀDC, X_Y)^{1/2}`, computed exactly from the `ℓ×ℓ` matrix
/// `L_Dᵀ C X_Y⁻¹ Cᵀ L_D` with `D = L_D L_Dᵀ`.
pub fn compute_gamma_c(model: &DiscreteModel) -> Result<f64> {
    let p = model.parts();
    let l = model.observation_dim();
    if l == 0 {
        return Ok(0.0);
    }
    let ld = p
        .obs_weight
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Contract("observation weight is not positive definite".into()))?
        .l();
    let mut cxc = DMatrix::zeros(l, l);
    for j in 0..l {
        let ej = DVector::from_fn(l, |i, _| if i == j { 1.0 } else { 0.0 });
        let w = model.state_metric_solve(&p.observation.apply_transpose(&ej));
        let cw = p.observation.apply(&w);
        cxc.set_column(j, &cw);
    }
    let s = ld.transpose() * cxc * &ld;
    let s = (&s + s.transpose()) * 0.5;
    let lambda = s.symmetric_eigen().eigenvalues.max();
    Ok(lambda.max(0.0).sqrt())
}

/// `γ_b = λ_max(Bᵀ X_Y⁻¹ B, X_U)^{1/2}` by Lanczos on
/// `L_U⁻¹ Bᵀ X_Y⁻¹ B L_U⁻ᵀ`.
pub fn compute_gamma_b(model: &DiscreteModel) -> Result<f64> {
    let p = model.parts();
    let lu = model.control_metric_factor(ControlSpace::Forcing);
    let nu = model.control_dim(ControlSpace::Forcing);
    let lambda = largest_eigenvalue(
        nu,
        |v| {
            let w = p.forcing.apply(&lu.solve_upper(v));
            lu.solve_lower(&p.forcing.apply_transpose(&model.state_metric_solve(&w)))
        },
        1e-13,
    )?;
    Ok(lambda.max(0.0).sqrt())
}

/// Largest eigenvalue of `A v = λ X v` for dense symmetric `A`, SPD `X`.
pub fn dense_generalized_max(a: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    Ok(dense_generalized_eigenvalues(a, x)?.max())
}

/// Smallest eigenvalue of `A v = λ X v` for dense symmetric `A`, SPD `X`.
pub fn dense_generalized_min(a: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    Ok(dense_generalized_eigenvalues(a, x)?.min())
}

fn dense_generalized_eigenvalues(a: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let l = x
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("metric is not positive definite".into()))?
        .l();
    let li = l
        .try_inverse()
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let s = &li * a * li.transpose();
    let s = (&s + s.transpose()) * 0.5;
    Ok(s.symmetric_eigen().eigenvalues)
}

/// Dense oracle for the coercivity constant
/// `α(μ) = inf vᵀA(μ)v / vᵀX_Y v`.
pub fn coercivity_constant_dense(model: &DiscreteModel, mu: f64) -> Result<f64> {
    let a = model.parts().stiffness.evaluate_dense(mu);
    let sym = (&a + a.transpose()) * 0.5;
    dense_generalized_min(&sym, &model.parts().state_metric.to_dense())
}

/// Dense oracle for `γ_c`.
pub fn gamma_c_dense(model: &DiscreteModel) -> Result<f64> {
    let p = model.parts();
    let c = p.observation.to_dense();
    let a = c.transpose() * &p.obs_weight * c;
    Ok(dense_generalized_max(&a, &p.state_metric.to_dense())?.max(0.0).sqrt())
}

/// Dense oracle for `γ_b`.
pub fn gamma_b_dense(model: &DiscreteModel) -> Result<f64> {
    let p = model.parts();
    let b = p.forcing.to_dense();
    let xy = p.state_metric.to_dense();
    let xinv_b = xy
        .cholesky()
        .ok_or_else(|| Error::Eigen("state metric is not positive definite".into()))?
        .solve(&b);
    let a = b.transpose() * xinv_b;
    Ok(dense_generalized_max(&a, &p.forcing_metric.to_dense())?.max(0.0).sqrt())
}
