//! Offline-online evaluation of residual dual norms.
//!
//! Every residual is an affine combination `r = W c(μ)` of fixed
//! full-order vectors (the columns of `W`) with coefficients `c` that
//! depend only on `μ` and reduced quantities. Offline we form
//! `Z = L⁻¹W` with `X = L Lᵀ` and its thin QR factor `R`; online
//! `‖r‖_{X'} = ‖L⁻¹ W c‖ = ‖R c‖`. Evaluating the norm through `R`
//! instead of `cᵀ(ZᵀZ)c` avoids the cancellation floor of the Gram form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::ReducedBasis;
use crate::control::{Control, Variant};
use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::model::{ControlSpace, DiscreteModel};
use crate::time_integration::{ObservationData, Problem, Trajectory};

/// Riesz data of one group of ingredient columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszBlock {
    pub columns: usize,
    /// Upper-trapezoidal factor `R` of `L⁻¹W = QR`.
    pub factor: DMatrix<f64>,
    /// Gram matrix `Wᵀ X⁻¹ W = RᵀR`.
    pub gram: DMatrix<f64>,
}

impl RieszBlock {
    fn build(columns: &[DVector<f64>], chol: &BandedCholesky) -> RieszBlock {
        let n = chol.dim();
        let m = columns.len();
        let mut z = DMatrix::zeros(n, m);
        for (j, w) in columns.iter().enumerate() {
            z.set_column(j, &chol.solve_lower(w));
        }
        let gram = z.tr_mul(&z);
        let factor = if m == 0 { DMatrix::zeros(0, 0) } else { z.qr().r() };
        RieszBlock { columns: m, factor, gram }
    }

    /// `‖W c‖_{X'}`
    pub fn norm(&self, c: &DVector<f64>) -> f64 {
        debug_assert_eq!(c.len(), self.columns);
        if self.columns == 0 {
            return 0.0;
        }
        (&self.factor * c).norm()
    }

    /// The same norm through the Gram matrix, clamped at zero.
    pub fn gram_norm(&self, c: &DVector<f64>) -> f64 {
        c.dot(&(&self.gram * c)).max(0.0).sqrt()
    }
}

/// Column layout of the state-space ingredients
/// `[F | A^q V_y | A^qᵀ V_y | M V_y | M_u V_u⁰ | M y₀ | B V_u | Cᵀ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub ny: usize,
    pub n0: usize,
    pub nu: usize,
    pub q: usize,
    pub ell: usize,
    pub has_y0: bool,
}

impl StateLayout {
    fn a(&self, q: usize) -> usize {
        1 + q * self.ny
    }
    fn at(&self, q: usize) -> usize {
        1 + (self.q + q) * self.ny
    }
    fn mass(&self) -> usize {
        1 + 2 * self.q * self.ny
    }
    fn init(&self) -> usize {
        self.mass() + self.ny
    }
    fn y0(&self) -> usize {
        self.init() + self.n0
    }
    fn forcing(&self) -> usize {
        self.y0() + usize::from(self.has_y0)
    }
    fn obs(&self) -> usize {
        self.forcing() + self.nu
    }
    fn len(&self) -> usize {
        self.obs() + self.ell
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualOfflineData {
    pub variant: Variant,
    pub layout: StateLayout,
    pub num_steps: usize,
    pub state: RieszBlock,
    /// `[M_uᵀ V_y | X_U V_u⁰ | X_U u_d⁰]`
    pub initial: Option<RieszBlock>,
    /// `[Bᵀ V_y | X_U V_u | X_U u_d^k …]`
    pub forcing: Option<RieszBlock>,
    /// Whether the forcing block carries one prior column per step.
    pub forcing_prior: bool,
}

/// Time-aggregated residual dual norms of a reduced optimum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualNorms {
    /// `R_y = (τ Σ ‖r_y^k‖²_{Y'})^{1/2}`
    pub r_y: f64,
    /// `R_p = (τ Σ ‖r_p^k‖²_{Y'})^{1/2}`
    pub r_p: f64,
    /// `‖r_u⁰‖_{U'}` (strong and combined).
    pub r_u0: Option<f64>,
    /// `R̃_u = (τ Σ ‖r̃_u^k‖²_{U'})^{1/2}` (weak and combined).
    pub r_u: Option<f64>,
}

/// Builds the Riesz data for the reduced spaces in `basis`.
pub fn build_offline_residual_data(
    full: &DiscreteModel,
    basis: &ReducedBasis,
    data: &ObservationData,
) -> Result<ResidualOfflineData> {
    let variant = basis.variant;
    data.validate(full, variant)?;
    let p = full.parts();
    let layout = StateLayout {
        ny: basis.state.len(),
        n0: basis.initial.len(),
        nu: basis.forcing.len(),
        q: p.stiffness.terms.len(),
        ell: full.observation_dim(),
        has_y0: variant == Variant::Weak,
    };
    let mut cols = Vec::with_capacity(layout.len());
    cols.push(p.load.clone());
    for (_, a) in &p.stiffness.terms {
        cols.extend(basis.state.iter().map(|v| a.apply(v)));
    }
    for (_, a) in &p.stiffness.terms {
        cols.extend(basis.state.iter().map(|v| a.apply_transpose(v)));
    }
    cols.extend(basis.state.iter().map(|v| p.mass.apply(v)));
    cols.extend(basis.initial.iter().map(|v| p.initial.apply(v)));
    if layout.has_y0 {
        cols.push(p.mass.apply(data.y0.as_ref().expect("validated")));
    }
    cols.extend(basis.forcing.iter().map(|v| p.forcing.apply(v)));
    for i in 0..layout.ell {
        let e = DVector::from_fn(layout.ell, |j, _| if i == j { 1.0 } else { 0.0 });
        cols.push(p.observation.apply_transpose(&e));
    }
    debug_assert_eq!(cols.len(), layout.len());
    let state = RieszBlock::build(&cols, full.state_metric_factor());

    let initial = variant.has_initial().then(|| {
        let x = &p.initial_metric;
        let mut c: Vec<DVector<f64>> = basis.state.iter().map(|v| p.initial.apply_transpose(v)).collect();
        c.extend(basis.initial.iter().map(|v| x.apply(v)));
        c.push(x.apply(data.u_d0.as_ref().expect("validated")));
        RieszBlock::build(&c, full.control_metric_factor(ControlSpace::Initial))
    });

    let forcing_prior = variant.has_forcing() && data.u_d.as_ref().is_some_and(|ud| ud.iter().any(|u| u.amax() > 0.0));
    let forcing = variant.has_forcing().then(|| {
        let x = &p.forcing_metric;
        let mut c: Vec<DVector<f64>> = basis.state.iter().map(|v| p.forcing.apply_transpose(v)).collect();
        c.extend(basis.forcing.iter().map(|v| x.apply(v)));
        if forcing_prior {
            c.extend(data.u_d.as_ref().expect("checked").iter().map(|u| x.apply(u)));
        }
        RieszBlock::build(&c, full.control_metric_factor(ControlSpace::Forcing))
    });

    Ok(ResidualOfflineData {
        variant,
        layout,
        num_steps: full.num_steps(),
        state,
        initial,
        forcing,
        forcing_prior,
    })
}

impl ResidualOfflineData {
    /// Online dual norms of the reduced optimum `(u_N, y_N, p_N)` at `mu`,
    /// with `reduced` the projected model and `data` the reduced data.
    pub fn dual_norms(
        &self,
        reduced: &DiscreteModel,
        data: &ObservationData,
        mu: f64,
        control: &Control,
        state: &Trajectory,
        adjoint: &Trajectory,
    ) -> Result<DualNorms> {
        let l = self.layout;
        if control.variant() != self.variant || reduced.state_dim() != l.ny {
            return Err(Error::Contract("reduced solution does not match the offline data".into()));
        }
        let p = reduced.parts();
        let tau = reduced.tau();
        let kmax = self.num_steps;
        let theta = p.stiffness.coefficients(mu);
        let mut sum_y = 0.0;
        let mut sum_p = 0.0;
        let mut c = DVector::zeros(l.len());
        for k in 1..=kmax {
            // state residual
            c.fill(0.0);
            c[0] = 1.0;
            let yk = state.at(k);
            for (q, t) in theta.iter().enumerate() {
                c.rows_mut(l.a(q), l.ny).axpy(-t, yk, 0.0);
            }
            c.rows_mut(l.mass(), l.ny).axpy(-1.0 / tau, yk, 0.0);
            if k == 1 {
                match control.initial() {
                    Some(u0) => c.rows_mut(l.init(), l.n0).axpy(1.0 / tau, u0, 0.0),
                    None => c[l.y0()] = 1.0 / tau,
                }
            } else {
                c.rows_mut(l.mass(), l.ny).axpy(1.0 / tau, state.at(k - 1), 1.0);
            }
            if let Some(u) = control.forcing() {
                c.rows_mut(l.forcing(), l.nu).copy_from(&u[k - 1]);
            }
            sum_y += self.state.norm(&c).powi(2);

            // adjoint residual
            c.fill(0.0);
            let pk = adjoint.at(k);
            for (q, t) in theta.iter().enumerate() {
                c.rows_mut(l.at(q), l.ny).axpy(-t, pk, 0.0);
            }
            c.rows_mut(l.mass(), l.ny).axpy(-1.0 / tau, pk, 0.0);
            c.rows_mut(l.mass(), l.ny).axpy(1.0 / tau, adjoint.at(k + 1), 1.0);
            let misfit = &data.z_d[k - 1] - p.observation.apply(yk);
            c.rows_mut(l.obs(), l.ell).copy_from(&(&p.obs_weight * misfit));
            sum_p += self.state.norm(&c).powi(2);
        }
        let mut out = DualNorms {
            r_y: (tau * sum_y).sqrt(),
            r_p: (tau * sum_p).sqrt(),
            r_u0: None,
            r_u: None,
        };
        if let (Some(block), Some(u0)) = (&self.initial, control.initial()) {
            let mut c = DVector::zeros(block.columns);
            c.rows_mut(0, l.ny).copy_from(adjoint.at(1));
            c.rows_mut(l.ny, l.n0).axpy(-1.0, u0, 0.0);
            c[l.ny + l.n0] = 1.0;
            out.r_u0 = Some(block.norm(&c));
        }
        if let (Some(block), Some(u)) = (&self.forcing, control.forcing()) {
            let mut sum = 0.0;
            let mut c = DVector::zeros(block.columns);
            for k in 1..=kmax {
                c.fill(0.0);
                c.rows_mut(0, l.ny).copy_from(adjoint.at(k));
                c.rows_mut(l.ny, l.nu).axpy(-1.0, &u[k - 1], 0.0);
                if self.forcing_prior {
                    c[l.ny + l.nu + k - 1] = 1.0;
                }
                sum += block.norm(&c).powi(2);
            }
            out.r_u = Some((tau * sum).sqrt());
        }
        Ok(out)
    }
}

/// Dual norms computed directly: lift the reduced solution, form the
/// full-order residual vectors and apply dense Cholesky factors of the
/// inner-product matrices.
pub fn dual_norms_dense(
    full: &DiscreteModel,
    basis: &ReducedBasis,
    data: &ObservationData,
    mu: f64,
    control: &Control,
    state: &Trajectory,
    adjoint: &Trajectory,
) -> Result<DualNorms> {
    let variant = control.variant();
    let problem = Problem::new(full, mu, data, variant)?;
    let u = basis.lift_control(full, control);
    let y = basis.lift_trajectory(full, state);
    let p = basis.lift_trajectory(full, adjoint);
    let parts = full.parts();
    let chol = |x: &crate::linalg::Operator| {
        x.to_dense()
            .cholesky()
            .ok_or_else(|| Error::Contract("inner product matrix is not positive definite".into()))
    };
    let xy = chol(&parts.state_metric)?;
    let dual = |ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>, r: &DVector<f64>| r.dot(&ch.solve(r)).max(0.0).sqrt();
    let tau = full.tau();
    let agg = |rs: Vec<DVector<f64>>| (tau * rs.iter().map(|r| dual(&xy, r).powi(2)).sum::<f64>()).sqrt();
    let r_y = agg(problem.state_residuals(&u, &y)?);
    let r_p = agg(problem.adjoint_residuals(&y, &p));
    let ru = problem.control_residuals(&u, &p);
    let r_u0 = match ru.initial() {
        Some(r) => Some(dual(&chol(&parts.initial_metric)?, r)),
        None => None,
    };
    let r_u = match ru.forcing() {
        Some(rs) => {
            let x = chol(&parts.forcing_metric)?;
            Some((tau * rs.iter().map(|r| dual(&x, r).powi(2)).sum::<f64>()).sqrt())
        }
        None => None,
    };
    Ok(DualNorms { r_y, r_p, r_u0, r_u })
}
