//! Controls of the three 4D-Var variants and the block metric they are
//! measured in.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlSpace, DiscreteModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Unknown initial condition, perfect model.
    Strong,
    /// Known initial condition, unknown model-error forcing.
    Weak,
    /// Unknown initial condition and forcing.
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Strong, Variant::Weak, Variant::Combined];

    pub fn has_initial(self) -> bool {
        matches!(self, Variant::Strong | Variant::Combined)
    }

    pub fn has_forcing(self) -> bool {
        matches!(self, Variant::Weak | Variant::Combined)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Strong => "strong",
            Variant::Weak => "weak",
            Variant::Combined => "combined",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(Variant::Strong),
            "weak" => Ok(Variant::Weak),
            "combined" => Ok(Variant::Combined),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// The unknown of the assimilation. Forcing vectors are indexed by time
/// step `k = 1..K` and stored at positions `0..K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    Strong { initial: DVector<f64> },
    Weak { forcing: Vec<DVector<f64>> },
    Combined { initial: DVector<f64>, forcing: Vec<DVector<f64>> },
}

impl Control {
    pub fn zeros(variant: Variant, n_initial: usize, n_forcing: usize, num_steps: usize) -> Self {
        let forcing = || vec![DVector::zeros(n_forcing); num_steps];
        match variant {
            Variant::Strong => Control::Strong { initial: DVector::zeros(n_initial) },
            Variant::Weak => Control::Weak { forcing: forcing() },
            Variant::Combined => Control::Combined {
                initial: DVector::zeros(n_initial),
                forcing: forcing(),
            },
        }
    }

    /// Zero control shaped for `model`.
    pub fn zeros_for(model: &DiscreteModel, variant: Variant) -> Self {
        Control::zeros(
            variant,
            model.control_dim(ControlSpace::Initial),
            model.control_dim(ControlSpace::Forcing),
            model.num_steps(),
        )
    }

    pub fn variant(&self) -> Variant {
        match self {
            Control::Strong { .. } => Variant::Strong,
            Control::Weak { .. } => Variant::Weak,
            Control::Combined { .. } => Variant::Combined,
        }
    }

    pub fn initial(&self) -> Option<&DVector<f64>> {
        match self {
            Control::Strong { initial } | Control::Combined { initial, .. } => Some(initial),
            Control::Weak { .. } => None,
        }
    }

    pub fn forcing(&self) -> Option<&[DVector<f64>]> {
        match self {
            Control::Weak { forcing } | Control::Combined { forcing, .. } => Some(forcing),
            Control::Strong { .. } => None,
        }
    }

    /// All blocks, initial condition first.
    pub fn blocks(&self) -> Vec<&DVector<f64>> {
        match self {
            Control::Strong { initial } => vec![initial],
            Control::Weak { forcing } => forcing.iter().collect(),
            Control::Combined { initial, forcing } => std::iter::once(initial).chain(forcing.iter()).collect(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut DVector<f64>> {
        match self {
            Control::Strong { initial } => vec![initial],
            Control::Weak { forcing } => forcing.iter_mut().collect(),
            Control::Combined { initial, forcing } => std::iter::once(initial).chain(forcing.iter_mut()).collect(),
        }
    }

    fn assert_same_shape(&self, other: &Control) {
        assert_eq!(self.variant(), other.variant(), "control variant mismatch");
        let (a, b) = (self.blocks(), other.blocks());
        assert_eq!(a.len(), b.len(), "control block count mismatch");
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.len(), y.len(), "control block size mismatch");
        }
    }

    /// Euclidean pairing of coefficient vectors (dual against primal).
    pub fn dot(&self, other: &Control) -> f64 {
        self.assert_same_shape(other);
        self.blocks().iter().zip(other.blocks()).map(|(a, b)| a.dot(b)).sum()
    }

    /// `self += a · x`
    pub fn axpy(&mut self, a: f64, x: &Control) {
        self.assert_same_shape(x);
        for (s, xb) in self.blocks_mut().into_iter().zip(x.blocks()) {
            s.axpy(a, xb, 1.0);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in self.blocks_mut() {
            *s *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Control {
        let mut c = self.clone();
        c.scale(a);
        c
    }

    pub fn sub(&self, other: &Control) -> Control {
        let mut c = self.clone();
        c.axpy(-1.0, other);
        c
    }

    /// Applies `f` block-wise with the space each block lives in.
    pub fn map_blocks(&self, mut f: impl FnMut(ControlSpace, &DVector<f64>) -> DVector<f64>) -> Control {
        match self {
            Control::Strong { initial } => Control::Strong { initial: f(ControlSpace::Initial, initial) },
            Control::Weak { forcing } => Control::Weak {
                forcing: forcing.iter().map(|u| f(ControlSpace::Forcing, u)).collect(),
            },
            Control::Combined { initial, forcing } => Control::Combined {
                initial: f(ControlSpace::Initial, initial),
                forcing: forcing.iter().map(|u| f(ControlSpace::Forcing, u)).collect(),
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// The block metric `blkdiag(X_U⁰, τX_U, …, τX_U)` the propositions measure
/// control errors in.
#[derive(Clone, Copy)]
pub struct ControlInnerProduct<'a> {
    model: &'a DiscreteModel,
}

impl<'a> ControlInnerProduct<'a> {
    pub fn new(model: &'a DiscreteModel) -> Self {
        ControlInnerProduct { model }
    }

    fn weight(&self, space: ControlSpace) -> f64 {
        match space {
            ControlSpace::Initial => 1.0,
            ControlSpace::Forcing => self.model.tau(),
        }
    }

    /// `G v`, mapping a primal control to its dual.
    pub fn apply(&self, v: &Control) -> Control {
        v.map_blocks(|s, u| self.model.control_metric(s).apply(u) * self.weight(s))
    }

    /// `G⁻¹ g`, the Riesz representative of a dual control.
    pub fn solve(&self, g: &Control) -> Control {
        g.map_blocks(|s, r| self.model.control_metric_solve(s, r) / self.weight(s))
    }

    pub fn inner(&self, a: &Control, b: &Control) -> f64 {
        self.apply(a).dot(b)
    }

    pub fn norm(&self, v: &Control) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Norm of a dual control, `(gᵀ G⁻¹ g)^{1/2}`.
    pub fn dual_norm(&self, g: &Control) -> f64 {
        self.solve(g).dot(g).max(0.0).sqrt()
    }
}
