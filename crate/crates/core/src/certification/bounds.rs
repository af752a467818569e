use serde::{Deserialize, Serialize};

use crate::control::Variant;
use crate::error::{Error, Result};

use super::constants::Constants;
use super::residual::DualNorms;

/// `Δ = c₁ + √(c₁² + c₂)`, the positive root of `x² − 2c₁x − c₂ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
}

impl Bound {
    fn new(c1: f64, c2: f64) -> Bound {
        Bound {
            c1,
            c2,
            delta: c1 + (c1 * c1 + c2).sqrt(),
        }
    }
}

fn check_inputs(values: &[f64], alpha_lb: f64) -> Result<()> {
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Contract(format!("bound inputs must be non-negative, got {values:?}")));
    }
    if !(alpha_lb > 0.0) {
        return Err(Error::Contract(format!("coercivity lower bound must be positive, got {alpha_lb}")));
    }
    Ok(())
}

/// Bound on `‖u* − u_N*‖_U` for the strong-constraint problem.
pub fn bound_strong(r_y: f64, r_p: f64, r_u: f64, alpha_lb: f64, gamma_c: f64) -> Result<Bound> {
    check_inputs(&[r_y, r_p, r_u, gamma_c], alpha_lb)?;
    let c1 = 0.5 * (r_u + r_p / alpha_lb.sqrt());
    let c2 = (2f64.sqrt() + 1.0) / alpha_lb * r_y * r_p + gamma_c.powi(2) / (2.0 * alpha_lb.powi(2)) * r_y.powi(2);
    Ok(Bound::new(c1, c2))
}

/// Bound on `(τ Σ ‖u^{*,k} − u_N^{*,k}‖²_U)^{1/2}` for the weak-constraint
/// problem.
pub fn bound_weak(r_y: f64, r_p: f64, r_u: f64, alpha_lb: f64, gamma_b: f64, gamma_c: f64) -> Result<Bound> {
    check_inputs(&[r_y, r_p, r_u, gamma_b, gamma_c], alpha_lb)?;
    let c1 = 0.5 * (r_u + 2f64.sqrt() * gamma_b / alpha_lb * r_p);
    let c2 = 2.0 * 2f64.sqrt() / alpha_lb * r_y * r_p + gamma_c.powi(2) / (2.0 * alpha_lb.powi(2)) * r_y.powi(2);
    Ok(Bound::new(c1, c2))
}

/// Bound on `(‖u^{*,0} − u_N^{*,0}‖²_U + τ Σ ‖u^{*,k} − u_N^{*,k}‖²_U)^{1/2}`
/// for the combined problem.
pub fn bound_combined(
    r_y: f64,
    r_p: f64,
    r_u0: f64,
    r_u: f64,
    alpha_lb: f64,
    gamma_b: f64,
    gamma_c: f64,
) -> Result<Bound> {
    check_inputs(&[r_y, r_p, r_u0, r_u, gamma_b, gamma_c], alpha_lb)?;
    let c1 = 0.5
        * ((r_u0.powi(2) + r_u.powi(2)).sqrt()
            + (2.0 * gamma_b.powi(2) / alpha_lb.powi(2) + 1.0 / alpha_lb).sqrt() * r_p);
    let c2 = 2.0 * 2f64.sqrt() / alpha_lb * r_y * r_p + gamma_c.powi(2) / (2.0 * alpha_lb.powi(2)) * r_y.powi(2);
    Ok(Bound::new(c1, c2))
}

/// Right-hand side of the space-time state error bound
/// `τ Σ ‖e_y^k‖²_Y ≤ R_y²/α_LB² + ‖e_u‖²/α_LB`.
pub fn state_energy_bound(r_y: f64, alpha_lb: f64, e_u_norm: f64) -> Result<f64> {
    check_inputs(&[r_y, e_u_norm], alpha_lb)?;
    Ok(r_y.powi(2) / alpha_lb.powi(2) + e_u_norm.powi(2) / alpha_lb)
}

/// Certificate of one reduced solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub variant: Variant,
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R_y")]
    pub r_y: f64,
    #[serde(rename = "R_p")]
    pub r_p: f64,
    /// Strong: `‖r_u‖_{U'}`; weak and combined: `R̃_u`.
    #[serde(rename = "R_u")]
    pub r_u: f64,
    /// Combined only: `‖r_u⁰‖_{U'}`.
    #[serde(rename = "R_u0", default, skip_serializing_if = "Option::is_none")]
    pub r_u0: Option<f64>,
    pub alpha_lb: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    pub error: Option<f64>,
    pub effectivity: Option<f64>,
}

impl CertificateReport {
    /// Evaluates the bound of `variant` from its dual norms.
    pub fn new(variant: Variant, mu: f64, n: usize, norms: &DualNorms, constants: &Constants) -> Result<Self> {
        let alpha = constants.alpha_lb(mu)?;
        let missing = |what: &str| Error::Contract(format!("{variant} certificate needs {what}"));
        let (bound, r_u, r_u0) = match variant {
            Variant::Strong => {
                let ru = norms.r_u0.ok_or_else(|| missing("the initial-condition residual"))?;
                (bound_strong(norms.r_y, norms.r_p, ru, alpha, constants.gamma_c)?, ru, None)
            }
            Variant::Weak => {
                let ru = norms.r_u.ok_or_else(|| missing("the forcing residual"))?;
                (
                    bound_weak(norms.r_y, norms.r_p, ru, alpha, constants.gamma_b, constants.gamma_c)?,
                    ru,
                    None,
                )
            }
            Variant::Combined => {
                let ru0 = norms.r_u0.ok_or_else(|| missing("the initial-condition residual"))?;
                let ru = norms.r_u.ok_or_else(|| missing("the forcing residual"))?;
                (
                    bound_combined(norms.r_y, norms.r_p, ru0, ru, alpha, constants.gamma_b, constants.gamma_c)?,
                    ru,
                    Some(ru0),
                )
            }
        };
        Ok(CertificateReport {
            variant,
            mu,
            n,
            r_y: norms.r_y,
            r_p: norms.r_p,
            r_u,
            r_u0,
            alpha_lb: alpha,
            gamma_b: constants.gamma_b,
            gamma_c: constants.gamma_c,
            c1: bound.c1,
            c2: bound.c2,
            delta: bound.delta,
            error: None,
            effectivity: None,
        })
    }

    /// Attaches the true error and the effectivity `Δ/error`.
    pub fn with_error(mut self, error: f64) -> Self {
        self.error = Some(error);
        self.effectivity = Some(if error > 0.0 { self.delta / error } else { f64::INFINITY });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        assert_eq!(Bound::new(1.0, 0.0).delta, 2.0);
        assert_eq!(Bound::new(0.0, 4.0).delta, 2.0);
        assert_eq!(bound_strong(0.0, 0.0, 0.0, 1.0, 3.0).unwrap().delta, 0.0);
        assert_eq!(bound_weak(0.0, 0.0, 0.0, 1.0, 2.0, 3.0).unwrap().delta, 0.0);
        assert_eq!(bound_combined(0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0).unwrap().delta, 0.0);
    }

    #[test]
    fn special_cases() {
        // R_y = 0 in the weak bound: Δ = R̃_u + √2 γ_b R̃_p / α
        let b = bound_weak(0.0, 0.3, 0.7, 0.6, 2.0, 5.0).unwrap();
        assert!((b.delta - (0.7 + 2f64.sqrt() * 2.0 * 0.3 / 0.6)).abs() < 1e-15);
        // only r_u⁰ nonzero in the combined bound: Δ = ‖r_u⁰‖
        let b = bound_combined(0.0, 0.0, 0.9, 0.0, 0.6, 2.0, 5.0).unwrap();
        assert!((b.delta - 0.9).abs() < 1e-15);
        assert_eq!(state_energy_bound(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(state_energy_bound(0.0, 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(bound_strong(-1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(bound_weak(0.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(bound_combined(0.0, f64::NAN, 0.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn report_json_keys() {
        let c = Constants {
            gamma_b: 1.0,
            gamma_c: 2.0,
            mu_ref: 30.0,
            mu_domain: (10.0, 50.0),
        };
        let norms = DualNorms {
            r_y: 0.1,
            r_p: 0.2,
            r_u0: Some(0.3),
            r_u: None,
        };
        let r = CertificateReport::new(Variant::Strong, 30.0, 4, &norms, &c).unwrap().with_error(0.01);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["mu", "N", "R_y", "R_p", "R_u", "alpha_lb", "c1", "c2", "delta", "error", "effectivity"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!((r.delta - (r.c1 + (r.c1 * r.c1 + r.c2).sqrt())).abs() < 1e-15);
        assert!(CertificateReport::new(Variant::Weak, 30.0, 4, &norms, &c).is_err());
    }
}
