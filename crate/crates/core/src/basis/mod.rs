//! Reduced spaces, Galerkin projection and POD-Greedy training.

pub mod greedy;
pub mod pod;
pub mod rom;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{Control, Variant};
use crate::error::{Error, Result};
use crate::linalg::{columns_to_matrix, orthogonalize, Operator};
use crate::model::{AffineOperator, ControlSpace, DiscreteModel, ModelKind, ModelParts};
use crate::time_integration::{ObservationData, Trajectory};

pub use greedy::{greedy, greedy_combined, greedy_strong, greedy_weak, GreedyConfig, GreedyIteration, GreedyTrace};
pub use pod::{pod_largest_mode, project_error_trajectory, projection_error};
pub use rom::{ReducedOrderModel, ReducedSolution};

/// Dimensions `(N_Y, N_U⁰, N_U)` of the reduced spaces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDims {
    pub state: usize,
    pub initial: usize,
    pub forcing: usize,
}

/// Orthonormal bases of `Y_N`, `U_N⁰` and `U_N` stored as columns.
///
/// Enrichment only appends, so the spaces after greedy iteration `n` are
/// the leading `dims[n]` columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedBasis {
    pub variant: Variant,
    pub state: Vec<DVector<f64>>,
    pub initial: Vec<DVector<f64>>,
    pub forcing: Vec<DVector<f64>>,
    /// Dimensions before the first greedy iteration.
    pub start_dims: BasisDims,
    /// Dimensions after each greedy iteration.
    pub history: Vec<BasisDims>,
}

impl ReducedBasis {
    pub fn empty(variant: Variant) -> Self {
        ReducedBasis {
            variant,
            state: Vec::new(),
            initial: Vec::new(),
            forcing: Vec::new(),
            start_dims: BasisDims::default(),
            history: Vec::new(),
        }
    }

    pub fn dims(&self) -> BasisDims {
        BasisDims {
            state: self.state.len(),
            initial: self.initial.len(),
            forcing: self.forcing.len(),
        }
    }

    /// Number of greedy iterations recorded.
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// The spaces after `n` greedy iterations.
    pub fn truncate(&self, n: usize) -> Result<ReducedBasis> {
        if n > self.history.len() {
            return Err(Error::Contract(format!(
                "basis has {} iterations, cannot truncate to {n}",
                self.history.len()
            )));
        }
        let d = if n == 0 { self.start_dims } else { self.history[n - 1] };
        Ok(ReducedBasis {
            variant: self.variant,
            state: self.state[..d.state].to_vec(),
            initial: self.initial[..d.initial].to_vec(),
            forcing: self.forcing[..d.forcing].to_vec(),
            start_dims: self.start_dims,
            history: self.history[..n].to_vec(),
        })
    }

    /// Appends `v` orthonormalized against `basis` in `metric`. Returns
    /// `false` if the `X`-norm of its complement is at most
    /// `rel_tol·‖v‖_X`.
    pub fn append(basis: &mut Vec<DVector<f64>>, metric: &Operator, v: &DVector<f64>, rel_tol: f64) -> bool {
        let norm = metric.form(v, v).max(0.0).sqrt();
        if !(norm > 0.0) {
            return false;
        }
        let w = orthogonalize(basis, metric, v);
        let wn = metric.form(&w, &w).max(0.0).sqrt();
        if wn <= rel_tol * norm {
            return false;
        }
        let w = orthogonalize(basis, metric, &(w / wn));
        let wn = metric.form(&w, &w).sqrt();
        basis.push(w / wn);
        true
    }

    /// Largest entry of `|VᵀXV − I|` over the three bases.
    pub fn orthonormality_defect(&self, model: &DiscreteModel) -> f64 {
        let check = |cols: &[DVector<f64>], x: &Operator| {
            if cols.is_empty() {
                return 0.0;
            }
            let v = columns_to_matrix(x.nrows(), cols);
            let g = x.project(&v, &v);
            (g - DMatrix::identity(cols.len(), cols.len())).amax()
        };
        let p = model.parts();
        check(&self.state, &p.state_metric)
            .max(check(&self.initial, &p.initial_metric))
            .max(check(&self.forcing, &p.forcing_metric))
    }

    pub fn state_matrix(&self, n: usize) -> DMatrix<f64> {
        columns_to_matrix(n, &self.state)
    }

    pub fn initial_matrix(&self, n: usize) -> DMatrix<f64> {
        columns_to_matrix(n, &self.initial)
    }

    pub fn forcing_matrix(&self, n: usize) -> DMatrix<f64> {
        columns_to_matrix(n, &self.forcing)
    }

    /// Lifts a reduced control to full-order coefficients.
    pub fn lift_control(&self, full: &DiscreteModel, c: &Control) -> Control {
        let n0 = full.control_dim(ControlSpace::Initial);
        let nu = full.control_dim(ControlSpace::Forcing);
        c.map_blocks(|space, v| match space {
            ControlSpace::Initial => combine(n0, &self.initial, v),
            ControlSpace::Forcing => combine(nu, &self.forcing, v),
        })
    }

    /// Lifts a reduced state or adjoint trajectory.
    pub fn lift_trajectory(&self, full: &DiscreteModel, t: &Trajectory) -> Trajectory {
        Trajectory {
            first_step: t.first_step,
            values: t.values.iter().map(|v| combine(full.state_dim(), &self.state, v)).collect(),
        }
    }
}

fn combine(n: usize, cols: &[DVector<f64>], coeffs: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (c, v) in coeffs.iter().zip(cols) {
        out.axpy(*c, v, 1.0);
    }
    out
}

/// Galerkin projection of `full` onto the spaces of `basis`. Reduced inner
/// products are identities since the bases are orthonormal.
pub fn project_model(full: &DiscreteModel, basis: &ReducedBasis) -> Result<DiscreteModel> {
    if basis.state.is_empty() {
        return Err(Error::Contract("cannot project onto an empty state space".into()));
    }
    let p = full.parts();
    let n = full.state_dim();
    let vy = basis.state_matrix(n);
    let vu0 = basis.initial_matrix(full.control_dim(ControlSpace::Initial));
    let vu = basis.forcing_matrix(full.control_dim(ControlSpace::Forcing));
    let d = basis.dims();
    let parts = ModelParts {
        kind: ModelKind::Reduced,
        mass: Operator::Dense(p.mass.project(&vy, &vy)),
        stiffness: AffineOperator {
            terms: p
                .stiffness
                .terms
                .iter()
                .map(|(c, a)| (*c, Operator::Dense(a.project(&vy, &vy))))
                .collect(),
        },
        forcing: Operator::Dense(p.forcing.project(&vy, &vu)),
        initial: Operator::Dense(p.initial.project(&vy, &vu0)),
        load: vy.tr_mul(&p.load),
        observation: Operator::Dense(p.observation.apply_block(&vy)),
        obs_weight: p.obs_weight.clone(),
        state_metric: Operator::Dense(DMatrix::identity(d.state, d.state)),
        initial_metric: Operator::Dense(DMatrix::identity(d.initial, d.initial)),
        forcing_metric: Operator::Dense(DMatrix::identity(d.forcing, d.forcing)),
        tau: p.tau,
        num_steps: p.num_steps,
    };
    DiscreteModel::new(parts)
}

/// Expresses the observation data in reduced coordinates.
///
/// Priors are replaced by their orthogonal projections; the discarded
/// part enters `prior_offset` so the reduced cost of a reduced control
/// equals the full cost of its lift up to the state approximation.
pub fn project_data(
    full: &DiscreteModel,
    reduced: &DiscreteModel,
    basis: &ReducedBasis,
    data: &ObservationData,
    variant: Variant,
) -> Result<ObservationData> {
    data.validate(full, variant)?;
    let p = full.parts();
    let mut offset = data.prior_offset;
    let mut proj = |cols: &[DVector<f64>], x: &Operator, v: &DVector<f64>, weight: f64| {
        let xv = x.apply(v);
        let c = DVector::from_iterator(cols.len(), cols.iter().map(|b| b.dot(&xv)));
        let rest = v - combine(v.len(), cols, &c);
        offset += 0.5 * weight * x.form(&rest, &rest);
        c
    };
    let u_d0 = if variant.has_initial() {
        let u = data.u_d0.as_ref().expect("validated");
        Some(proj(&basis.initial, &p.initial_metric, u, 1.0))
    } else {
        None
    };
    let u_d = match (&data.u_d, variant.has_forcing()) {
        (Some(ud), true) => Some(
            ud.iter()
                .map(|u| proj(&basis.forcing, &p.forcing_metric, u, p.tau))
                .collect(),
        ),
        _ => None,
    };
    let y0 = if variant == Variant::Weak {
        let y = data.y0.as_ref().expect("validated");
        let vy = basis.state_matrix(full.state_dim());
        Some(reduced.mass_solve(&vy.tr_mul(&p.mass.apply(y))))
    } else {
        None
    };
    Ok(ObservationData {
        z_d: data.z_d.clone(),
        u_d0,
        u_d,
        y0,
        prior_offset: offset,
    })
}
