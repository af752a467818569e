use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::Variant;
use crate::error::{Error, Result};
use crate::model::FullOrderModel;
use crate::time_integration::{simulate, ObservationData, Trajectory};

use super::config::PriorChoice;

/// Name of the noise generator recorded with synthesized data.
pub const NOISE_RNG: &str = "ChaCha20 (rand_chacha), seeded with seed_from_u64";

/// Synthetic observations of a true trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthData {
    pub mu_true: f64,
    pub y0_true: DVector<f64>,
    pub y_true: Trajectory,
    /// `C y^{k,true}`, `k = 1..K`.
    pub clean: Vec<DVector<f64>>,
    pub noise: Vec<DVector<f64>>,
    /// `z_d^k = C y^{k,true} + η^k`.
    pub z_d: Vec<DVector<f64>>,
    pub noise_std: f64,
    pub seed: u64,
    pub rng: String,
}

/// Simulates the full model at `mu_true` from `y0_true` and adds i.i.d.
/// `N(0, noise_std²)` noise to every output, drawn step by step.
pub fn synthesize_observations(
    fom: &FullOrderModel,
    mu_true: f64,
    y0_true: &DVector<f64>,
    noise_std: f64,
    seed: u64,
) -> Result<TruthData> {
    fom.check_mu(mu_true)?;
    if !(noise_std >= 0.0) {
        return Err(Error::Config(format!("noise standard deviation must be non-negative, got {noise_std}")));
    }
    let model = &fom.model;
    let y_true = simulate(model, mu_true, y0_true, None)?;
    let c = &model.parts().observation;
    let clean: Vec<DVector<f64>> = (1..=model.num_steps()).map(|k| c.apply(y_true.at(k))).collect();
    let l = model.observation_dim();
    let noise: Vec<DVector<f64>> = if noise_std > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
        clean
            .iter()
            .map(|_| DVector::from_fn(l, |_, _| normal.sample(&mut rng)))
            .collect()
    } else {
        vec![DVector::zeros(l); clean.len()]
    };
    let z_d: Vec<DVector<f64>> = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
    // Record the perturbation actually applied, so `z_d − C y = η` holds in
    // floating point.
    let noise = z_d.iter().zip(&clean).map(|(z, c)| z - c).collect();
    Ok(TruthData {
        mu_true,
        y0_true: y0_true.clone(),
        y_true,
        clean,
        noise,
        z_d,
        noise_std,
        seed,
        rng: NOISE_RNG.into(),
    })
}

/// Observation data of each variant for the benchmark.
///
/// Strong: background equal to the true initial condition. Weak: known
/// initial state `y₀^true` and zero forcing prior. Combined: background
/// chosen by `prior`, zero forcing prior.
pub fn variant_data(truth: &TruthData, variant: Variant, prior: PriorChoice) -> ObservationData {
    let n = truth.y0_true.len();
    let (u_d0, y0) = match variant {
        Variant::Strong => (Some(truth.y0_true.clone()), None),
        Variant::Weak => (None, Some(truth.y0_true.clone())),
        Variant::Combined => (
            Some(match prior {
                PriorChoice::Truth => truth.y0_true.clone(),
                PriorChoice::Zero => DVector::zeros(n),
            }),
            None,
        ),
    };
    ObservationData {
        z_d: truth.z_d.clone(),
        u_d0,
        u_d: None,
        y0,
        prior_offset: 0.0,
    }
}

/// `size` parameters drawn uniformly from `domain` with a seeded generator.
pub fn random_parameters(domain: (f64, f64), size: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..size).map(|_| rng.random_range(domain.0..=domain.1)).collect()
}
