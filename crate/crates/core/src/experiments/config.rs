use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::GreedyConfig;
use crate::control::Variant;
use crate::error::{Error, Result};
use crate::fem::{default_sensors, BenchmarkConfig};
use crate::optimizer::SolveOptions;

pub const SCHEMA_VERSION: u32 = 1;

/// Full description of a benchmark run. Every key is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub discretization: DiscretizationConfig,
    pub truth: TruthConfig,
    /// Background initial condition of the combined variant.
    pub combined_prior: PriorChoice,
    pub greedy: GreedySettings,
    pub test: TestSettings,
    pub solver: SolverSettings,
    pub sweep: SweepSettings,
    pub estimate: EstimateSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub h: f64,
    pub tau: f64,
    pub num_steps: usize,
    pub mu_ref: f64,
    pub mu_domain: [f64; 2],
    pub obs_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub mu_true: f64,
    pub center: [f64; 2],
    pub sigma: f64,
    pub amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorChoice {
    /// The true initial condition.
    Truth,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySettings {
    /// Number of equidistant training parameters, endpoints included.
    pub train_size: usize,
    pub mu_start: f64,
    pub n_max: usize,
    pub tol: f64,
    pub dependence_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSettings {
    /// Number of uniformly drawn test parameters.
    pub size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub variants: Vec<Variant>,
    pub n_list: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSettings {
    pub variants: Vec<Variant>,
    pub n_list: Vec<usize>,
    /// Absolute tolerance of the scalar minimization.
    pub tol: f64,
}

impl ExperimentConfig {
    /// Desk-scale benchmark: 676 nodes, 100 steps, 10 training parameters.
    pub fn desk() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            discretization: DiscretizationConfig {
                h: 0.08,
                tau: 0.08,
                num_steps: 100,
                mu_ref: 30.0,
                mu_domain: [10.0, 50.0],
                obs_weight: 10.0,
            },
            truth: TruthConfig {
                mu_true: 30.0,
                center: [-0.1, 0.8],
                sigma: 0.1,
                amplitude: 1.0,
                noise_std: 0.05,
                seed: 2024,
            },
            combined_prior: PriorChoice::Truth,
            greedy: GreedySettings {
                train_size: 10,
                mu_start: 10.0,
                n_max: 20,
                tol: 1e-10,
                dependence_tol: 1e-8,
            },
            test: TestSettings { size: 5, seed: 7 },
            solver: SolverSettings {
                cg_rel_tol: 1e-10,
                cg_max_iter: 10_000,
            },
            sweep: SweepSettings {
                variants: Variant::ALL.to_vec(),
                n_list: vec![1, 2, 5, 10, 15, 20],
            },
            estimate: EstimateSettings {
                variants: vec![Variant::Strong, Variant::Weak],
                n_list: vec![2, 5, 10, 15, 20],
                tol: 1e-6,
            },
        }
    }

    /// The published study's discretization and greedy settings. Long
    /// running.
    pub fn full_scale() -> Self {
        let mut c = Self::desk();
        c.discretization.h = 0.04;
        c.discretization.tau = 0.04;
        c.discretization.num_steps = 200;
        c.greedy.train_size = 40;
        c.greedy.n_max = 100;
        c.test.size = 20;
        c.sweep.n_list = vec![10, 20, 40, 60, 80, 100];
        c.estimate.n_list = vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100];
        c
    }

    /// Parses JSON, reporting the path of the offending key on failure.
    pub fn from_json(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, msg: &str| Err(Error::Config(format!("{path}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return fail("schema_version", &format!("expected {SCHEMA_VERSION}"));
        }
        let d = &self.discretization;
        if !(d.h > 0.0) {
            return fail("discretization.h", "must be positive");
        }
        if !(d.tau > 0.0) {
            return fail("discretization.tau", "must be positive");
        }
        if d.num_steps == 0 {
            return fail("discretization.num_steps", "must be positive");
        }
        let [lo, hi] = d.mu_domain;
        if !(lo > 0.0 && hi > lo) {
            return fail("discretization.mu_domain", "must be an interval of positive numbers");
        }
        if !(d.mu_ref > 0.0) {
            return fail("discretization.mu_ref", "must be positive");
        }
        if !(d.obs_weight > 0.0) {
            return fail("discretization.obs_weight", "must be positive");
        }
        let in_domain = |mu: f64| mu >= lo && mu <= hi;
        let t = &self.truth;
        if !in_domain(t.mu_true) {
            return fail("truth.mu_true", "must lie in the parameter domain");
        }
        if !(t.sigma > 0.0) {
            return fail("truth.sigma", "must be positive");
        }
        if !t.amplitude.is_finite() || t.amplitude == 0.0 {
            return fail("truth.amplitude", "must be finite and nonzero");
        }
        if !(t.noise_std >= 0.0) {
            return fail("truth.noise_std", "must be non-negative");
        }
        let g = &self.greedy;
        if g.train_size < 2 {
            return fail("greedy.train_size", "must be at least 2");
        }
        if !in_domain(g.mu_start) {
            return fail("greedy.mu_start", "must lie in the parameter domain");
        }
        if g.n_max == 0 {
            return fail("greedy.n_max", "must be positive");
        }
        if !(g.tol > 0.0) {
            return fail("greedy.tol", "must be positive");
        }
        if !(g.dependence_tol > 0.0 && g.dependence_tol < 1.0) {
            return fail("greedy.dependence_tol", "must lie in (0,1)");
        }
        if self.test.size == 0 {
            return fail("test.size", "must be positive");
        }
        if !(self.solver.cg_rel_tol > 0.0 && self.solver.cg_rel_tol < 1.0) {
            return fail("solver.cg_rel_tol", "must lie in (0,1)");
        }
        if self.solver.cg_max_iter == 0 {
            return fail("solver.cg_max_iter", "must be positive");
        }
        for (path, list) in [("sweep.n_list", &self.sweep.n_list), ("estimate.n_list", &self.estimate.n_list)] {
            if list.iter().any(|&n| n == 0 || n > g.n_max) {
                return fail(path, "entries must lie in 1..=greedy.n_max");
            }
        }
        if !(self.estimate.tol > 0.0) {
            return fail("estimate.tol", "must be positive");
        }
        Ok(())
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        let d = &self.discretization;
        BenchmarkConfig {
            h: d.h,
            tau: d.tau,
            num_steps: d.num_steps,
            mu_domain: (d.mu_domain[0], d.mu_domain[1]),
            mu_ref: d.mu_ref,
            obs_weight: d.obs_weight,
            sensors: default_sensors(),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            cg_rel_tol: self.solver.cg_rel_tol,
            cg_max_iter: self.solver.cg_max_iter,
            record_iterations: false,
        }
    }

    /// Equidistant training parameters including both endpoints.
    pub fn training_set(&self) -> Vec<f64> {
        let [lo, hi] = self.discretization.mu_domain;
        let n = self.greedy.train_size;
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn greedy_config(&self, variant: Variant) -> GreedyConfig {
        GreedyConfig {
            variant,
            train: self.training_set(),
            mu_start: self.greedy.mu_start,
            n_max: self.greedy.n_max,
            tol: self.greedy.tol,
            dependence_tol: self.greedy.dependence_tol,
            solve: self.solve_options(),
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
