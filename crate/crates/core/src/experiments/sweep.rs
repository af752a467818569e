use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ReducedOrderModel;
use crate::certification::CertificateReport;
use crate::control::{ControlInnerProduct, Variant};
use crate::error::Result;
use crate::model::FullOrderModel;
use crate::optimizer::{solve_4dvar, AssimilationResult, SolveOptions};
use crate::time_integration::ObservationData;

use super::io::fmt_f64;

pub const SWEEP_HEADER: [&str; 16] = [
    "variant",
    "mu",
    "N",
    "error",
    "bound",
    "effectivity",
    "cg_iters",
    "t_solve_ms",
    "t_bound_ms",
    "rel_error",
    "rel_bound",
    "status",
    "schema_version",
    "config_hash",
    "rom_hash",
    "seed",
];

/// Wall-clock columns, excluded from reproducibility comparisons.
pub const TIMING_COLUMNS: [&str; 2] = ["t_solve_ms", "t_bound_ms"];

/// Provenance stamped on every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub config_hash: String,
    pub rom_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub mu: f64,
    pub n: usize,
    /// `‖u* − u_N*‖` in the metric of the variant's bound.
    pub error: f64,
    pub bound: f64,
    pub effectivity: f64,
    pub cg_iters: usize,
    pub t_solve_ms: f64,
    pub t_bound_ms: f64,
    pub rel_error: f64,
    pub rel_bound: f64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl SweepRow {
    fn failed(variant: Variant, mu: f64, n: usize, reason: &str) -> Self {
        SweepRow {
            variant,
            mu,
            n,
            error: f64::NAN,
            bound: f64::NAN,
            effectivity: f64::NAN,
            cg_iters: 0,
            t_solve_ms: f64::NAN,
            t_bound_ms: f64::NAN,
            rel_error: f64::NAN,
            rel_bound: f64::NAN,
            status: format!("failed: {reason}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn record(&self, meta: &RunMeta) -> Vec<String> {
        vec![
            self.variant.to_string(),
            fmt_f64(self.mu),
            self.n.to_string(),
            fmt_f64(self.error),
            fmt_f64(self.bound),
            fmt_f64(self.effectivity),
            self.cg_iters.to_string(),
            fmt_f64(self.t_solve_ms),
            fmt_f64(self.t_bound_ms),
            fmt_f64(self.rel_error),
            fmt_f64(self.rel_bound),
            self.status.clone(),
            meta.schema_version.to_string(),
            meta.config_hash.clone(),
            meta.rom_hash.clone(),
            meta.seed.to_string(),
        ]
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    /// Ordered by `N`, then by test parameter.
    pub rows: Vec<SweepRow>,
    pub certificates: Vec<CertificateReport>,
}

/// Certified reduced solves against full reference solves for every test
/// parameter and every `N` in `n_list`. Failures become marked rows.
pub fn run_sweep(
    fom: &FullOrderModel,
    data: &ObservationData,
    rom: &ReducedOrderModel,
    test: &[f64],
    n_list: &[usize],
    opts: &SolveOptions,
) -> Result<SweepOutput> {
    let variant = rom.variant;
    let roms: Vec<ReducedOrderModel> = n_list
        .iter()
        .map(|&n| rom.truncated(fom, data, n))
        .collect::<Result<_>>()?;
    let full: Vec<std::result::Result<AssimilationResult, String>> = test
        .par_iter()
        .map(|&mu| {
            fom.check_mu(mu)
                .and_then(|_| solve_4dvar(&fom.model, mu, data, variant, opts))
                .map_err(|e| format!("full solve: {e}"))
        })
        .collect();
    let ip = ControlInnerProduct::new(&fom.model);
    let mut out = SweepOutput::default();
    for (rom_n, &n) in roms.iter().zip(n_list) {
        let cells: Vec<(SweepRow, Option<CertificateReport>)> = test
            .par_iter()
            .zip(&full)
            .map(|(&mu, reference)| {
                let reference = match reference {
                    Ok(r) => r,
                    Err(msg) => return (SweepRow::failed(variant, mu, n, msg), None),
                };
                match rom_n.solve_certified(mu, opts) {
                    Ok(sol) => {
                        let lifted = rom_n.lift_control(fom, &sol.result.control);
                        let error = ip.norm(&reference.control.sub(&lifted));
                        let cert = sol.certificate.with_error(error);
                        let bound = cert.delta;
                        let row = SweepRow {
                            variant,
                            mu,
                            n,
                            error,
                            bound,
                            effectivity: bound / error,
                            cg_iters: sol.result.cg_iterations,
                            t_solve_ms: sol.t_solve_ms,
                            t_bound_ms: sol.t_bound_ms,
                            rel_error: error / ip.norm(&reference.control),
                            rel_bound: bound / ip.norm(&reference.control),
                            status: "ok".into(),
                        };
                        (row, Some(cert))
                    }
                    Err(e) => {
                        warn!("{variant} N = {n}, mu = {mu}: {e}");
                        (SweepRow::failed(variant, mu, n, &e.to_string()), None)
                    }
                }
            })
            .collect();
        for (row, cert) in cells {
            out.rows.push(row);
            out.certificates.extend(cert);
        }
    }
    Ok(out)
}
