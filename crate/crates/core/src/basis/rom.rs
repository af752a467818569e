use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certification::{build_offline_residual_data, CertificateReport, Constants, DualNorms, ResidualOfflineData};
use crate::control::{Control, ControlInnerProduct, Variant};
use crate::error::Result;
use crate::model::{check_domain, DiscreteModel, FullOrderModel};
use crate::optimizer::{solve_4dvar, AssimilationResult, SolveOptions};
use crate::time_integration::ObservationData;

use super::{project_data, project_model, ReducedBasis};

/// Projected model, reduced data and offline certification data for one
/// set of reduced spaces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedOrderModel {
    pub variant: Variant,
    pub basis: ReducedBasis,
    pub model: DiscreteModel,
    pub data: ObservationData,
    pub offline: ResidualOfflineData,
    pub constants: Constants,
}

/// A certified reduced solve.
#[derive(Clone, Debug)]
pub struct ReducedSolution {
    pub result: AssimilationResult,
    pub norms: DualNorms,
    pub certificate: CertificateReport,
    pub t_solve_ms: f64,
    pub t_bound_ms: f64,
}

impl ReducedOrderModel {
    pub fn build(
        fom: &FullOrderModel,
        basis: ReducedBasis,
        data: &ObservationData,
        constants: Constants,
    ) -> Result<Self> {
        let model = project_model(&fom.model, &basis)?;
        let rdata = project_data(&fom.model, &model, &basis, data, basis.variant)?;
        let offline = build_offline_residual_data(&fom.model, &basis, data)?;
        Ok(ReducedOrderModel {
            variant: basis.variant,
            basis,
            model,
            data: rdata,
            offline,
            constants,
        })
    }

    /// The model after `n` greedy iterations.
    pub fn truncated(&self, fom: &FullOrderModel, data: &ObservationData, n: usize) -> Result<Self> {
        ReducedOrderModel::build(fom, self.basis.truncate(n)?, data, self.constants)
    }

    pub fn iterations(&self) -> usize {
        self.basis.iterations()
    }

    pub fn solve(&self, mu: f64, opts: &SolveOptions) -> Result<AssimilationResult> {
        check_domain(self.constants.mu_domain, mu)?;
        solve_4dvar(&self.model, mu, &self.data, self.variant, opts)
    }

    pub fn certify(&self, sol: &AssimilationResult) -> Result<(DualNorms, CertificateReport)> {
        let norms = self
            .offline
            .dual_norms(&self.model, &self.data, sol.mu, &sol.control, &sol.state, &sol.adjoint)?;
        let report = CertificateReport::new(self.variant, sol.mu, self.iterations(), &norms, &self.constants)?;
        Ok((norms, report))
    }

    pub fn solve_certified(&self, mu: f64, opts: &SolveOptions) -> Result<ReducedSolution> {
        let t0 = Instant::now();
        let result = self.solve(mu, opts)?;
        let t1 = Instant::now();
        let (norms, certificate) = self.certify(&result)?;
        let t2 = Instant::now();
        Ok(ReducedSolution {
            result,
            norms,
            certificate,
            t_solve_ms: (t1 - t0).as_secs_f64() * 1e3,
            t_bound_ms: (t2 - t1).as_secs_f64() * 1e3,
        })
    }

    /// Norm of a reduced control in the metric of the variant's bound.
    pub fn control_norm(&self, c: &Control) -> f64 {
        ControlInnerProduct::new(&self.model).norm(c)
    }

    pub fn lift_control(&self, fom: &FullOrderModel, c: &Control) -> Control {
        self.basis.lift_control(&fom.model, c)
    }
}
