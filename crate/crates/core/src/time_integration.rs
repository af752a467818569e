//! Implicit Euler state and adjoint solvers, cost, gradient and
//! Hessian-vector products for all 4D-Var variants.
//!
//! Everything here is generic over the operator set: the same functions
//! run on the finite element model and on a projected reduced model.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::{Control, ControlInnerProduct, Variant};
use crate::error::{Error, Result};
use crate::model::{ControlSpace, DiscreteModel, StepFactor};

/// A sequence of coefficient vectors indexed by time step.
///
/// States hold `y⁰..y^K` (`first_step = 0`); adjoints hold `p¹..p^{K+1}`
/// (`first_step = 1`) with `p^{K+1} = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub first_step: usize,
    pub values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn at(&self, k: usize) -> &DVector<f64> {
        &self.values[k - self.first_step]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Steps `1..=K`, the part that enters cost and residuals.
    pub fn interior(&self, num_steps: usize) -> impl Iterator<Item = (usize, &DVector<f64>)> {
        (1..=num_steps).map(move |k| (k, self.at(k)))
    }
}

/// Observations and priors in the coordinates of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationData {
    /// `z_d^k`, `k = 1..K`, stored at `0..K`.
    pub z_d: Vec<DVector<f64>>,
    /// Background initial condition `u_d⁰` (strong and combined).
    pub u_d0: Option<DVector<f64>>,
    /// Forcing prior `u_d^k`; `None` means zero.
    pub u_d: Option<Vec<DVector<f64>>>,
    /// Known initial state `y₀` (weak).
    pub y0: Option<DVector<f64>>,
    /// Constant added to the cost. Zero at full order; reduced models use it
    /// for the part of the prior outside the reduced control space.
    #[serde(default)]
    pub prior_offset: f64,
}

impl ObservationData {
    pub fn validate(&self, model: &DiscreteModel, variant: Variant) -> Result<()> {
        let k = model.num_steps();
        if self.z_d.len() != k {
            return Err(Error::Contract(format!("expected {k} observation vectors, got {}", self.z_d.len())));
        }
        let l = model.observation_dim();
        if self.z_d.iter().any(|z| z.len() != l) {
            return Err(Error::Contract(format!("observation vectors must have length {l}")));
        }
        if variant.has_initial() {
            let n0 = model.control_dim(ControlSpace::Initial);
            match &self.u_d0 {
                Some(u) if u.len() == n0 => {}
                Some(_) => return Err(Error::Contract("background initial condition has wrong length".into())),
                None => return Err(Error::Contract(format!("{variant} variant needs a background initial condition"))),
            }
        }
        if variant == Variant::Weak {
            match &self.y0 {
                Some(y) if y.len() == model.state_dim() => {}
                Some(_) => return Err(Error::Contract("initial state has wrong length".into())),
                None => return Err(Error::Contract("weak variant needs a known initial state".into())),
            }
        }
        if let Some(ud) = &self.u_d {
            let nu = model.control_dim(ControlSpace::Forcing);
            if ud.len() != k || ud.iter().any(|u| u.len() != nu) {
                return Err(Error::Contract("forcing prior has wrong shape".into()));
            }
        }
        Ok(())
    }

    /// The prior as a control of the given variant.
    pub fn prior(&self, model: &DiscreteModel, variant: Variant) -> Control {
        let mut c = Control::zeros_for(model, variant);
        match &mut c {
            Control::Strong { initial } => *initial = self.u_d0.clone().expect("validated"),
            Control::Weak { forcing } => {
                if let Some(ud) = &self.u_d {
                    *forcing = ud.clone();
                }
            }
            Control::Combined { initial, forcing } => {
                *initial = self.u_d0.clone().expect("validated");
                if let Some(ud) = &self.u_d {
                    *forcing = ud.clone();
                }
            }
        }
        c
    }
}

/// A 4D-Var problem at fixed parameter with its step factorization.
pub struct Problem<'a> {
    pub model: &'a DiscreteModel,
    pub data: &'a ObservationData,
    pub variant: Variant,
    factor: StepFactor,
}

/// Inhomogeneous terms switched off for linearized (Hessian) solves.
#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Affine,
    Linear,
}

impl<'a> Problem<'a> {
    pub fn new(model: &'a DiscreteModel, mu: f64, data: &'a ObservationData, variant: Variant) -> Result<Self> {
        data.validate(model, variant)?;
        let factor = model.factorize(mu)?;
        Ok(Problem { model, data, variant, factor })
    }

    pub fn mu(&self) -> f64 {
        self.factor.mu()
    }

    pub fn factor(&self) -> &StepFactor {
        &self.factor
    }

    fn check_control(&self, ctrl: &Control) -> Result<()> {
        if ctrl.variant() != self.variant {
            return Err(Error::Contract(format!(
                "control of variant {} used with a {} problem",
                ctrl.variant(),
                self.variant
            )));
        }
        Ok(())
    }

    pub fn solve_state(&self, ctrl: &Control) -> Result<Trajectory> {
        self.check_control(ctrl)?;
        Ok(self.state_impl(ctrl, Mode::Affine))
    }

    fn state_impl(&self, ctrl: &Control, mode: Mode) -> Trajectory {
        let m = self.model;
        let p = m.parts();
        let tau = m.tau();
        let y0 = match ctrl.initial() {
            Some(u0) => m.mass_solve(&p.initial.apply(u0)),
            None => match mode {
                Mode::Affine => self.data.y0.clone().expect("validated"),
                Mode::Linear => DVector::zeros(m.state_dim()),
            },
        };
        let forcing = ctrl.forcing();
        let mut values = Vec::with_capacity(m.num_steps() + 1);
        values.push(y0);
        for k in 1..=m.num_steps() {
            let mut rhs = p.mass.apply(&values[k - 1]);
            if mode == Mode::Affine {
                rhs.axpy(tau, &p.load, 1.0);
            }
            if let Some(u) = forcing {
                rhs.axpy(tau, &p.forcing.apply(&u[k - 1]), 1.0);
            }
            values.push(self.factor.solve(&rhs));
        }
        Trajectory { first_step: 0, values }
    }

    /// Backward recursion `(M + τAᵀ) p^k = M p^{k+1} + τ Cᵀ D (z^k − C y^k)`.
    pub fn solve_adjoint(&self, state: &Trajectory) -> Result<Trajectory> {
        if state.len() != self.model.num_steps() + 1 || state.at(0).len() != self.model.state_dim() {
            return Err(Error::Contract("state trajectory does not match the model".into()));
        }
        Ok(self.adjoint_impl(state, Mode::Affine))
    }

    fn adjoint_impl(&self, state: &Trajectory, mode: Mode) -> Trajectory {
        let m = self.model;
        let p = m.parts();
        let kmax = m.num_steps();
        let tau = m.tau();
        let mut values = vec![DVector::zeros(m.state_dim()); kmax + 1];
        for k in (1..=kmax).rev() {
            let mut misfit = -p.observation.apply(state.at(k));
            if mode == Mode::Affine {
                misfit += &self.data.z_d[k - 1];
            }
            let mut rhs = p.observation.apply_transpose(&(&p.obs_weight * misfit)) * tau;
            rhs += p.mass.apply(&values[k]);
            values[k - 1] = self.factor.solve_transpose(&rhs);
        }
        Trajectory { first_step: 1, values }
    }

    /// Cost `J(y(u), u; μ)` of the variant.
    pub fn cost(&self, ctrl: &Control) -> Result<f64> {
        let y = self.solve_state(ctrl)?;
        Ok(self.cost_with_state(ctrl, &y))
    }

    pub fn cost_with_state(&self, ctrl: &Control, y: &Trajectory) -> f64 {
        let m = self.model;
        let p = m.parts();
        let tau = m.tau();
        let dev = ctrl.sub(&self.data.prior(m, self.variant));
        let mut j = 0.5 * ControlInnerProduct::new(m).inner(&dev, &dev);
        for (k, yk) in y.interior(m.num_steps()) {
            let r = p.observation.apply(yk) - &self.data.z_d[k - 1];
            j += 0.5 * tau * r.dot(&(&p.obs_weight * &r));
        }
        j + self.data.prior_offset
    }

    fn coupling(&self, adjoint: &Trajectory) -> Control {
        let m = self.model;
        let p = m.parts();
        let tau = m.tau();
        let mut c = Control::zeros_for(m, self.variant);
        match &mut c {
            Control::Strong { initial } => *initial = p.initial.apply_transpose(adjoint.at(1)),
            Control::Weak { forcing } => {
                for (k, f) in forcing.iter_mut().enumerate() {
                    *f = p.forcing.apply_transpose(adjoint.at(k + 1)) * tau;
                }
            }
            Control::Combined { initial, forcing } => {
                *initial = p.initial.apply_transpose(adjoint.at(1));
                for (k, f) in forcing.iter_mut().enumerate() {
                    *f = p.forcing.apply_transpose(adjoint.at(k + 1)) * tau;
                }
            }
        }
        c
    }

    /// Gradient of the reduced cost as a dual vector:
    /// `X_U(u⁰ − u_d⁰) − M_uᵀ p¹` and `τ(X_U(u^k − u_d^k) − Bᵀ p^k)`.
    pub fn gradient(&self, ctrl: &Control) -> Result<Control> {
        let y = self.solve_state(ctrl)?;
        let adj = self.adjoint_impl(&y, Mode::Affine);
        Ok(self.gradient_from(ctrl, &adj))
    }

    pub fn gradient_from(&self, ctrl: &Control, adjoint: &Trajectory) -> Control {
        let ip = ControlInnerProduct::new(self.model);
        let mut g = ip.apply(&ctrl.sub(&self.data.prior(self.model, self.variant)));
        g.axpy(-1.0, &self.coupling(adjoint));
        g
    }

    /// Hessian-vector product of the (quadratic) reduced cost.
    pub fn hessian_apply(&self, dir: &Control) -> Result<Control> {
        self.check_control(dir)?;
        let y = self.state_impl(dir, Mode::Linear);
        let adj = self.adjoint_impl(&y, Mode::Linear);
        let mut h = ControlInnerProduct::new(self.model).apply(dir);
        h.axpy(-1.0, &self.coupling(&adj));
        Ok(h)
    }

    /// `M y⁰` as seen by the first time step: `M_u u⁰` when the initial
    /// condition is a control, `M y₀` otherwise.
    fn initial_mass_term(&self, ctrl: &Control) -> DVector<f64> {
        let p = self.model.parts();
        match ctrl.initial() {
            Some(u0) => p.initial.apply(u0),
            None => p.mass.apply(self.data.y0.as_ref().expect("validated")),
        }
    }

    /// State residuals `r_y^k = F + B u^k − A y^k − (M y^k − M y^{k−1})/τ`,
    /// `k = 1..K`, as dual vectors.
    pub fn state_residuals(&self, ctrl: &Control, y: &Trajectory) -> Result<Vec<DVector<f64>>> {
        self.check_control(ctrl)?;
        let p = self.model.parts();
        let tau = self.model.tau();
        let mu = self.mu();
        let mut prev = self.initial_mass_term(ctrl);
        let mut out = Vec::with_capacity(self.model.num_steps());
        for (k, yk) in y.interior(self.model.num_steps()) {
            let my = p.mass.apply(yk);
            let mut r = p.load.clone() - p.stiffness.apply(mu, yk);
            r.axpy(-1.0 / tau, &(&my - &prev), 1.0);
            if let Some(u) = ctrl.forcing() {
                r += p.forcing.apply(&u[k - 1]);
            }
            out.push(r);
            prev = my;
        }
        Ok(out)
    }

    /// Adjoint residuals
    /// `r_p^k = Cᵀ D (z^k − C y^k) − Aᵀ p^k − M (p^k − p^{k+1})/τ`.
    pub fn adjoint_residuals(&self, y: &Trajectory, adj: &Trajectory) -> Vec<DVector<f64>> {
        let p = self.model.parts();
        let tau = self.model.tau();
        let mu = self.mu();
        let kmax = self.model.num_steps();
        (1..=kmax)
            .map(|k| {
                let misfit = &self.data.z_d[k - 1] - p.observation.apply(y.at(k));
                let mut r = p.observation.apply_transpose(&(&p.obs_weight * misfit));
                r -= p.stiffness.apply_transpose(mu, adj.at(k));
                let next = if k < kmax { p.mass.apply(adj.at(k + 1)) } else { DVector::zeros(r.len()) };
                r.axpy(-1.0 / tau, &(p.mass.apply(adj.at(k)) - next), 1.0);
                r
            })
            .collect()
    }

    /// Control residuals in dual form: `r_u = M_uᵀ p¹ − X_U(u⁰ − u_d⁰)` for
    /// the initial block and `r̃_u^k = Bᵀ p^k − X_U(u^k − u_d^k)` per step.
    /// Equals `−g` with the `τ` weight removed from the forcing blocks.
    pub fn control_residuals(&self, ctrl: &Control, adj: &Trajectory) -> Control {
        let tau = self.model.tau();
        let g = self.gradient_from(ctrl, adj);
        g.map_blocks(|space, v| match space {
            crate::model::ControlSpace::Initial => -v,
            crate::model::ControlSpace::Forcing => -v / tau,
        })
    }

    /// Observation part of the Hessian computed directly as
    /// `τ Σ (C δy^k[v])ᵀ D (C δy^k[w])`, i.e. without an adjoint solve.
    pub fn observation_form(&self, v: &Control, w: &Control) -> Result<f64> {
        self.check_control(v)?;
        self.check_control(w)?;
        let p = self.model.parts();
        let yv = self.state_impl(v, Mode::Linear);
        let yw = self.state_impl(w, Mode::Linear);
        let mut s = 0.0;
        for k in 1..=self.model.num_steps() {
            let cv = p.observation.apply(yv.at(k));
            let cw = p.observation.apply(yw.at(k));
            s += self.model.tau() * cv.dot(&(&p.obs_weight * cw));
        }
        Ok(s)
    }
}

/// Forward simulation from a known initial state `y⁰ = y0`, with optional
/// forcing `u^k`, independent of any 4D-Var data.
pub fn simulate(
    model: &DiscreteModel,
    mu: f64,
    y0: &DVector<f64>,
    forcing: Option<&[DVector<f64>]>,
) -> Result<Trajectory> {
    let p = model.parts();
    if y0.len() != model.state_dim() {
        return Err(Error::Contract("initial state has wrong length".into()));
    }
    if forcing.is_some_and(|f| f.len() != model.num_steps()) {
        return Err(Error::Contract("forcing must have one vector per step".into()));
    }
    let factor = model.factorize(mu)?;
    let mut values = Vec::with_capacity(model.num_steps() + 1);
    values.push(y0.clone());
    for k in 1..=model.num_steps() {
        let mut rhs = p.mass.apply(&values[k - 1]);
        rhs.axpy(model.tau(), &p.load, 1.0);
        if let Some(f) = forcing {
            rhs.axpy(model.tau(), &p.forcing.apply(&f[k - 1]), 1.0);
        }
        values.push(factor.solve(&rhs));
    }
    Ok(Trajectory { first_step: 0, values })
}

pub fn solve_state(model: &DiscreteModel, mu: f64, ctrl: &Control, data: &ObservationData) -> Result<Trajectory> {
    Problem::new(model, mu, data, ctrl.variant())?.solve_state(ctrl)
}

pub fn solve_adjoint(
    model: &DiscreteModel,
    mu: f64,
    state: &Trajectory,
    data: &ObservationData,
    variant: Variant,
) -> Result<Trajectory> {
    Problem::new(model, mu, data, variant)?.solve_adjoint(state)
}

pub fn cost(model: &DiscreteModel, mu: f64, ctrl: &Control, data: &ObservationData) -> Result<f64> {
    Problem::new(model, mu, data, ctrl.variant())?.cost(ctrl)
}

pub fn gradient(model: &DiscreteModel, mu: f64, ctrl: &Control, data: &ObservationData) -> Result<Control> {
    Problem::new(model, mu, data, ctrl.variant())?.gradient(ctrl)
}

pub fn hessian_apply(model: &DiscreteModel, mu: f64, dir: &Control, data: &ObservationData) -> Result<Control> {
    Problem::new(model, mu, data, dir.variant())?.hessian_apply(dir)
}

/// Writes `k, C y^k` rows for plotting output trajectories.
pub fn write_outputs_csv<W: std::io::Write>(model: &DiscreteModel, y: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let l = model.observation_dim();
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((1..=l).map(|i| format!("output_{i}")));
    w.write_record(&header)?;
    for k in 0..y.len() {
        let step = k + y.first_step;
        let c = model.parts().observation.apply(&y.values[k]);
        let mut rec = vec![step.to_string(), format!("{:.16e}", step as f64 * model.tau())];
        rec.extend(c.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
