//! Constants, residual dual norms and a-posteriori bounds on the control
//! error of the reduced 4D-Var problems.

pub mod bounds;
pub mod constants;
pub mod residual;

pub use bounds::{bound_combined, bound_strong, bound_weak, state_energy_bound, Bound, CertificateReport};
pub use constants::{
    coercivity_constant_dense, coercivity_lower_bound, compute_gamma_b, compute_gamma_c, gamma_b_dense, gamma_c_dense,
    Constants,
};
pub use residual::{build_offline_residual_data, dual_norms_dense, DualNorms, ResidualOfflineData, RieszBlock};
