pub mod basis;
pub mod certification;
pub mod control;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod model;
pub mod optimizer;
#[cfg(test)]
mod properties;
pub mod time_integration;

pub use control::{Control, ControlInnerProduct, Variant};
pub use error::{Error, Result};
pub use model::{ControlSpace, DiscreteModel, FullOrderModel, ModelKind};
