//! Benchmark drivers: configuration, synthetic data, sweeps and parameter
//! estimation.

pub mod config;
pub mod estimate;
pub mod io;
pub mod sweep;
pub mod truth;

use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::basis::{greedy, GreedyTrace, ReducedOrderModel};
use crate::certification::Constants;
use crate::control::Variant;
use crate::error::{Error, Result};
use crate::fem::{build_benchmark, Benchmark};
use crate::model::FullOrderModel;
use crate::time_integration::ObservationData;

pub use config::{ExperimentConfig, PriorChoice, SCHEMA_VERSION};
pub use estimate::{brent_minimize, estimate_parameter, outer_error_table, Minimum, OuterErrorRow, OuterErrorTable};
pub use sweep::{run_sweep, RunMeta, SweepOutput, SweepRow, SWEEP_HEADER, TIMING_COLUMNS};
pub use truth::{random_parameters, synthesize_observations, variant_data, TruthData};

/// Everything derived deterministically from a configuration: discretization,
/// constants and synthetic observations.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub bench: Benchmark,
    pub constants: Constants,
    pub truth: TruthData,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let bench = build_benchmark(&config.benchmark())?;
        let constants = Constants::compute(&bench.fom)?;
        info!(
            "{} free nodes, gamma_b = {:.6e}, gamma_c = {:.6e}",
            bench.free.len(),
            constants.gamma_b,
            constants.gamma_c
        );
        let t = &config.truth;
        let y0 = bench.gaussian(t.center, t.sigma, t.amplitude)?;
        let truth = synthesize_observations(&bench.fom, t.mu_true, &y0, t.noise_std, t.seed)?;
        Ok(Experiment {
            config,
            bench,
            constants,
            truth,
        })
    }

    pub fn fom(&self) -> &FullOrderModel {
        &self.bench.fom
    }

    pub fn data(&self, variant: Variant) -> ObservationData {
        variant_data(&self.truth, variant, self.config.combined_prior)
    }

    pub fn test_set(&self) -> Vec<f64> {
        random_parameters(self.fom().mu_domain, self.config.test.size, self.config.test.seed)
    }

    pub fn train(&self, variant: Variant) -> Result<RomFile> {
        let (rom, trace) = greedy(self.fom(), &self.data(variant), &self.constants, &self.config.greedy_config(variant))?;
        Ok(RomFile {
            format_version: ROM_FORMAT_VERSION,
            variant,
            config_hash: self.config.hash(),
            trace,
            rom,
        })
    }

    pub fn sweep(&self, rom: &ReducedOrderModel) -> Result<SweepOutput> {
        run_sweep(
            self.fom(),
            &self.data(rom.variant),
            rom,
            &self.test_set(),
            &self.config.sweep.n_list,
            &self.config.solve_options(),
        )
    }

    pub fn estimate(&self, rom: &ReducedOrderModel) -> Result<OuterErrorTable> {
        outer_error_table(
            self.fom(),
            &self.data(rom.variant),
            rom,
            &self.config.estimate.n_list,
            &self.config.training_set(),
            &self.config.solve_options(),
            self.config.estimate.tol,
        )
    }
}

pub const ROM_FORMAT_VERSION: u32 = 1;

/// A trained reduced model with its greedy trace, as stored on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RomFile {
    pub format_version: u32,
    pub variant: Variant,
    pub config_hash: String,
    pub trace: GreedyTrace,
    pub rom: ReducedOrderModel,
}

impl RomFile {
    pub fn file_name(variant: Variant) -> String {
        format!("rom_{variant}.json")
    }

    /// Writes the file and returns the SHA-256 of its bytes.
    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        io::write_atomic(path, &bytes)?;
        Ok(io::sha256_hex(&bytes))
    }

    /// Reads a file and returns it with the SHA-256 of its bytes.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let file: RomFile = serde_json::from_slice(&bytes)?;
        if file.format_version != ROM_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported reduced-model format {}",
                path.display(),
                file.format_version
            )));
        }
        Ok((file, io::sha256_hex(&bytes)))
    }
}

/// Summary statistics of the successful sweep rows of one `(variant, N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub variant: Variant,
    pub n: usize,
    pub count: usize,
    pub failed: usize,
    pub max_rel_error: f64,
    pub max_rel_bound: f64,
    pub mean_effectivity: f64,
    pub min_effectivity: f64,
    pub max_effectivity: f64,
    pub mean_cg_iters: f64,
}

/// Aggregates sweep rows per `(variant, N)` in order of first appearance.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut keys: Vec<(Variant, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.variant, r.n)) {
            keys.push((r.variant, r.n));
        }
    }
    keys.into_iter()
        .map(|(variant, n)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.variant == variant && r.n == n).collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.is_ok()).collect();
            let count = ok.len();
            let max = |f: fn(&SweepRow) -> f64| ok.iter().map(|r| f(r)).fold(f64::NAN, f64::max);
            let min = |f: fn(&SweepRow) -> f64| ok.iter().map(|r| f(r)).fold(f64::NAN, f64::min);
            let mean = |f: fn(&SweepRow) -> f64| {
                if count == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / count as f64
                }
            };
            SweepSummary {
                variant,
                n,
                count,
                failed: group.len() - count,
                max_rel_error: max(|r| r.rel_error),
                max_rel_bound: max(|r| r.rel_bound),
                mean_effectivity: mean(|r| r.effectivity),
                min_effectivity: min(|r| r.effectivity),
                max_effectivity: max(|r| r.effectivity),
                mean_cg_iters: mean(|r| r.cg_iters as f64),
            }
        })
        .collect()
}

/// Parses rows written by [`SweepRow::record`].
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(Error::Config(format!("{}: unexpected sweep header", path.display())));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("{}: malformed number {s:?}", path.display())))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Config(format!("{}: malformed integer {s:?}", path.display())))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let r = rec?;
        rows.push(SweepRow {
            variant: r[0].parse()?,
            mu: num(&r[1])?,
            n: int(&r[2])?,
            error: num(&r[3])?,
            bound: num(&r[4])?,
            effectivity: num(&r[5])?,
            cg_iters: int(&r[6])?,
            t_solve_ms: num(&r[7])?,
            t_bound_ms: num(&r[8])?,
            rel_error: num(&r[9])?,
            rel_bound: num(&r[10])?,
            status: r[11].to_string(),
        });
    }
    Ok(rows)
}
