//! Discrete operator sets for the parabolic 4D-Var problem.
//!
//! A [`DiscreteModel`] holds every operator the time-stepping and
//! optimization code needs. The same type is used at full order (sparse
//! finite element matrices) and at reduced order (dense projected
//! matrices), so both levels run through one code path.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedLu, Operator};

/// Parameter dependence `Θ(μ)` of one affine term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    One,
    /// `1/μ`, e.g. diffusion with `μ` a Péclet number.
    InverseParameter,
}

impl Coefficient {
    pub fn eval(self, mu: f64) -> f64 {
        match self {
            Coefficient::One => 1.0,
            Coefficient::InverseParameter => 1.0 / mu,
        }
    }
}

/// `A(μ) = Σ_q Θ_q(μ) A_q`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineOperator {
    pub terms: Vec<(Coefficient, Operator)>,
}

impl AffineOperator {
    pub fn coefficients(&self, mu: f64) -> Vec<f64> {
        self.terms.iter().map(|(c, _)| c.eval(mu)).collect()
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, a)| a.nrows())
    }

    pub fn apply(&self, mu: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (c, a) in &self.terms {
            y.axpy(c.eval(mu), &a.apply(x), 1.0);
        }
        y
    }

    pub fn apply_transpose(&self, mu: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (c, a) in &self.terms {
            y.axpy(c.eval(mu), &a.apply_transpose(x), 1.0);
        }
        y
    }

    /// Dense evaluation of `A(μ)`.
    pub fn evaluate_dense(&self, mu: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (c, a) in &self.terms {
            out += a.to_dense() * c.eval(mu);
        }
        out
    }
}

/// Whether a model lives on the finite element space or on reduced spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Full,
    Reduced,
}

/// Which control space a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlSpace {
    /// Initial condition space (`U` at full order, `U_N⁰` reduced).
    Initial,
    /// Model-error forcing space (`U` at full order, `U_N` reduced).
    Forcing,
}

/// Serializable operator data of a [`DiscreteModel`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelParts {
    pub kind: ModelKind,
    /// `M`, houses `m(·,·)`.
    pub mass: Operator,
    /// `A(μ)`, houses `a(·,·;μ)`.
    pub stiffness: AffineOperator,
    /// `B` (`n_y × n_u`), houses `b(·,·)`.
    pub forcing: Operator,
    /// `M_u` (`n_y × n_u0`), couples the initial-condition control to `y⁰`.
    pub initial: Operator,
    /// `F`, houses `f`.
    pub load: DVector<f64>,
    /// `C` (`ℓ × n_y`).
    pub observation: Operator,
    /// Observation weight `D` (`ℓ × ℓ`).
    pub obs_weight: DMatrix<f64>,
    /// `X_Y`, the state inner product.
    pub state_metric: Operator,
    /// Inner product on the initial-condition control space.
    pub initial_metric: Operator,
    /// Inner product on the forcing control space.
    pub forcing_metric: Operator,
    pub tau: f64,
    pub num_steps: usize,
}

struct Factors {
    mass: BandedLu,
    state_metric: BandedCholesky,
    initial_metric: BandedCholesky,
    forcing_metric: BandedCholesky,
}

impl Factors {
    fn new(p: &ModelParts) -> Result<Self> {
        Ok(Factors {
            mass: BandedLu::factor(&p.mass)?,
            state_metric: BandedCholesky::factor(&p.state_metric)?,
            initial_metric: BandedCholesky::factor(&p.initial_metric)?,
            forcing_metric: BandedCholesky::factor(&p.forcing_metric)?,
        })
    }
}

/// Factorization of the implicit Euler step matrix `M + τA(μ)`.
///
/// Forward solves advance the state; transpose solves advance the adjoint.
pub struct StepFactor {
    mu: f64,
    lu: BandedLu,
}

impl StepFactor {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b)
    }

    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve_transpose(b)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(try_from = "ModelParts", into = "ModelParts")]
pub struct DiscreteModel {
    parts: ModelParts,
    factors: Factors,
    factorizations: AtomicUsize,
}

impl Clone for DiscreteModel {
    fn clone(&self) -> Self {
        DiscreteModel {
            parts: self.parts.clone(),
            factors: Factors::new(&self.parts).expect("factors of a validated model"),
            factorizations: AtomicUsize::new(0),
        }
    }
}

impl std::fmt::Debug for DiscreteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteModel")
            .field("kind", &self.parts.kind)
            .field("n_y", &self.state_dim())
            .field("n_u0", &self.control_dim(ControlSpace::Initial))
            .field("n_u", &self.control_dim(ControlSpace::Forcing))
            .field("tau", &self.parts.tau)
            .field("num_steps", &self.parts.num_steps)
            .finish()
    }
}

impl TryFrom<ModelParts> for DiscreteModel {
    type Error = Error;
    fn try_from(p: ModelParts) -> Result<Self> {
        DiscreteModel::new(p)
    }
}

impl From<DiscreteModel> for ModelParts {
    fn from(m: DiscreteModel) -> Self {
        m.parts
    }
}

impl DiscreteModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        validate(&parts)?;
        let factors = Factors::new(&parts)?;
        Ok(DiscreteModel {
            parts,
            factors,
            factorizations: AtomicUsize::new(0),
        })
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn kind(&self) -> ModelKind {
        self.parts.kind
    }

    pub fn state_dim(&self) -> usize {
        self.parts.mass.nrows()
    }

    pub fn control_dim(&self, space: ControlSpace) -> usize {
        match space {
            ControlSpace::Initial => self.parts.initial.ncols(),
            ControlSpace::Forcing => self.parts.forcing.ncols(),
        }
    }

    pub fn observation_dim(&self) -> usize {
        self.parts.observation.nrows()
    }

    pub fn tau(&self) -> f64 {
        self.parts.tau
    }

    pub fn num_steps(&self) -> usize {
        self.parts.num_steps
    }

    /// Factorizes `M + τA(μ)`; every call is counted.
    pub fn factorize(&self, mu: f64) -> Result<StepFactor> {
        let theta = self.parts.stiffness.coefficients(mu);
        let mut terms: Vec<(f64, &Operator)> = vec![(1.0, &self.parts.mass)];
        for ((_, a), t) in self.parts.stiffness.terms.iter().zip(&theta) {
            terms.push((self.parts.tau * t, a));
        }
        let lu = BandedLu::factor_sum(&terms)?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        Ok(StepFactor { mu, lu })
    }

    /// Number of step-matrix factorizations performed so far.
    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factors.mass.solve(b)
    }

    pub fn state_metric_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factors.state_metric.solve(b)
    }

    pub fn state_metric_factor(&self) -> &BandedCholesky {
        &self.factors.state_metric
    }

    pub fn control_metric(&self, space: ControlSpace) -> &Operator {
        match space {
            ControlSpace::Initial => &self.parts.initial_metric,
            ControlSpace::Forcing => &self.parts.forcing_metric,
        }
    }

    pub fn control_metric_factor(&self, space: ControlSpace) -> &BandedCholesky {
        match space {
            ControlSpace::Initial => &self.factors.initial_metric,
            ControlSpace::Forcing => &self.factors.forcing_metric,
        }
    }

    pub fn control_metric_solve(&self, space: ControlSpace, b: &DVector<f64>) -> DVector<f64> {
        self.control_metric_factor(space).solve(b)
    }

    /// Dual norm `(rᵀ X_Y⁻¹ r)^{1/2}` of a state-space functional.
    pub fn state_dual_norm(&self, r: &DVector<f64>) -> f64 {
        self.factors.state_metric.solve_lower(r).norm()
    }

    /// Dual norm of a functional on the given control space.
    pub fn control_dual_norm(&self, space: ControlSpace, r: &DVector<f64>) -> f64 {
        self.control_metric_factor(space).solve_lower(r).norm()
    }
}

fn validate(p: &ModelParts) -> Result<()> {
    let n = p.mass.nrows();
    let check = |what: &str, ok: bool| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("inconsistent dimensions: {what}")))
        }
    };
    check("mass must be square", p.mass.ncols() == n)?;
    check("stiffness terms", !p.stiffness.terms.is_empty())?;
    for (_, a) in &p.stiffness.terms {
        check("stiffness term shape", a.nrows() == n && a.ncols() == n)?;
    }
    check("forcing rows", p.forcing.nrows() == n)?;
    check("initial coupling rows", p.initial.nrows() == n)?;
    check("load length", p.load.len() == n)?;
    check("observation columns", p.observation.ncols() == n)?;
    let l = p.observation.nrows();
    check("observation weight", p.obs_weight.nrows() == l && p.obs_weight.ncols() == l)?;
    check("state metric", p.state_metric.nrows() == n && p.state_metric.ncols() == n)?;
    let n0 = p.initial.ncols();
    check("initial metric", p.initial_metric.nrows() == n0 && p.initial_metric.ncols() == n0)?;
    let nu = p.forcing.ncols();
    check("forcing metric", p.forcing_metric.nrows() == nu && p.forcing_metric.ncols() == nu)?;
    if !(p.tau > 0.0) || p.num_steps == 0 {
        return Err(Error::Contract("time step and number of steps must be positive".into()));
    }
    if l > 0 && p.obs_weight.clone().cholesky().is_none() {
        return Err(Error::Contract("observation weight must be symmetric positive definite".into()));
    }
    Ok(())
}

/// Finite element model together with its parameter domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FullOrderModel {
    pub model: DiscreteModel,
    pub mu_domain: (f64, f64),
    pub mu_ref: f64,
}

impl FullOrderModel {
    pub fn check_mu(&self, mu: f64) -> Result<()> {
        check_domain(self.mu_domain, mu)
    }
}

pub fn check_domain(domain: (f64, f64), mu: f64) -> Result<()> {
    let (lo, hi) = domain;
    if mu.is_finite() && mu >= lo && mu <= hi {
        Ok(())
    } else {
        Err(Error::Domain { mu, lo, hi })
    }
}
