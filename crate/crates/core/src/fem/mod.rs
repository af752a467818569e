//! P1 finite elements on the unit-square benchmark and the Taylor-Green
//! convection-diffusion instance built from them.

pub mod assembly;
pub mod mesh;
pub mod observation;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Operator;
use crate::model::{AffineOperator, Coefficient, DiscreteModel, FullOrderModel, ModelKind, ModelParts};

pub use assembly::{assemble_direct, assemble_operators, taylor_green, FemOperators};
pub use mesh::{build_mesh, Mesh};
pub use observation::{assemble_observation, default_sensors, gaussian_initial_condition, observation_weight, SensorBox};

/// Discretization and problem constants of the benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub h: f64,
    pub tau: f64,
    pub num_steps: usize,
    pub mu_domain: (f64, f64),
    pub mu_ref: f64,
    /// Diagonal value of the observation weight `D`.
    pub obs_weight: f64,
    pub sensors: Vec<SensorBox>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            h: 0.08,
            tau: 0.08,
            num_steps: 100,
            mu_domain: (10.0, 50.0),
            mu_ref: 30.0,
            obs_weight: 10.0,
            sensors: default_sensors(),
        }
    }
}

/// The assembled benchmark: mesh, full-node operators and the model on the
/// free degrees of freedom.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub mesh: Mesh,
    /// Free node indices; position `i` of a model vector is node `free[i]`.
    pub free: Vec<usize>,
    /// Matrices on all nodes, before Dirichlet elimination.
    pub full: FemOperators,
    pub observation_full: Operator,
    pub fom: FullOrderModel,
}

pub fn build_benchmark(config: &BenchmarkConfig) -> Result<Benchmark> {
    let (lo, hi) = config.mu_domain;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Config(format!("invalid parameter domain [{lo}, {hi}]")));
    }
    if !(config.mu_ref > 0.0) || !(config.obs_weight > 0.0) {
        return Err(Error::Config("reference parameter and observation weight must be positive".into()));
    }
    if !(config.tau > 0.0) || config.num_steps == 0 {
        return Err(Error::Config("time step and number of steps must be positive".into()));
    }
    let mesh = build_mesh(config.h)?;
    mesh.validate()?;
    let full = assemble_operators(&mesh)?;
    let observation_full = assemble_observation(&mesh, &config.sensors)?;
    let free = mesh.free_nodes();
    let all_rows: Vec<usize> = (0..config.sensors.len()).collect();

    let m = full.mass.restrict(&free, &free);
    let k = full.diffusion.restrict(&free, &free);
    let n = full.convection.restrict(&free, &free);
    let nf = free.len();
    let parts = ModelParts {
        kind: ModelKind::Full,
        mass: m.clone(),
        stiffness: AffineOperator {
            terms: vec![(Coefficient::InverseParameter, k.clone()), (Coefficient::One, n)],
        },
        forcing: m.clone(),
        initial: m.clone(),
        load: DVector::zeros(nf),
        observation: observation_full.restrict(&all_rows, &free),
        obs_weight: observation_weight(config.sensors.len(), config.obs_weight),
        state_metric: k.scaled(1.0 / config.mu_ref),
        initial_metric: m.clone(),
        forcing_metric: m,
        tau: config.tau,
        num_steps: config.num_steps,
    };
    let model = DiscreteModel::new(parts)?;
    Ok(Benchmark {
        config: config.clone(),
        mesh,
        free,
        full,
        observation_full,
        fom: FullOrderModel {
            model,
            mu_domain: config.mu_domain,
            mu_ref: config.mu_ref,
        },
    })
}

impl Benchmark {
    /// Picks the free entries of a vector indexed by all nodes.
    pub fn restrict(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| v[i]))
    }

    /// Extends a free-node vector by zero Dirichlet values.
    pub fn lift(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.mesh.num_nodes());
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    /// Gaussian initial condition on the free nodes.
    pub fn gaussian(&self, center: [f64; 2], sigma: f64, amplitude: f64) -> Result<DVector<f64>> {
        Ok(self.restrict(&gaussian_initial_condition(&self.mesh, center, sigma, amplitude)?))
    }

    pub fn dump(&self) -> OperatorDump {
        let p = self.fom.model.parts();
        let mut operators = vec![
            Triplets::new("mass", &p.mass),
            Triplets::new("diffusion", &p.stiffness.terms[0].1),
            Triplets::new("convection", &p.stiffness.terms[1].1),
            Triplets::new("observation", &p.observation),
            Triplets::new("state_metric", &p.state_metric),
        ];
        operators.push(Triplets::new("obs_weight", &Operator::Dense(p.obs_weight.clone())));
        OperatorDump {
            format_version: OperatorDump::VERSION,
            h: self.mesh.h,
            num_steps: p.num_steps,
            tau: p.tau,
            mu_ref: self.fom.mu_ref,
            mu_domain: self.fom.mu_domain,
            free_nodes: self.free.clone(),
            operators,
        }
    }
}

/// Sparse matrix in coordinate form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplets {
    pub name: String,
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl Triplets {
    pub fn new(name: &str, a: &Operator) -> Self {
        let (mut rows, mut cols, mut values) = (Vec::new(), Vec::new(), Vec::new());
        a.for_each_entry(|i, j, v| {
            if v != 0.0 {
                rows.push(i);
                cols.push(j);
                values.push(v);
            }
        });
        Triplets {
            name: name.into(),
            nrows: a.nrows(),
            ncols: a.ncols(),
            rows,
            cols,
            values,
        }
    }

    pub fn to_operator(&self) -> Operator {
        let t: Vec<_> = (0..self.values.len())
            .map(|k| (self.rows[k], self.cols[k], self.values[k]))
            .collect();
        Operator::from_triplets(self.nrows, self.ncols, &t)
    }
}

/// Versioned operator container written by `assemble`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDump {
    pub format_version: u32,
    pub h: f64,
    pub num_steps: usize,
    pub tau: f64,
    pub mu_ref: f64,
    pub mu_domain: (f64, f64),
    pub free_nodes: Vec<usize>,
    pub operators: Vec<Triplets>,
}

impl OperatorDump {
    pub const VERSION: u32 = 1;
}
