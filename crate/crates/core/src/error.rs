use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parameter {mu} outside the domain [{lo}, {hi}]")]
    Domain { mu: f64, lo: f64, hi: f64 },

    #[error("conjugate gradients did not converge in {iterations} iterations (last relative residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error("all snapshots are zero")]
    DegenerateSnapshots,

    #[error("non-finite cost at mu = {mu}")]
    NonFinite { mu: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by user-supplied configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain { .. })
    }
}
