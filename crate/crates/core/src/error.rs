use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable index {index} out of range for {v} variables")]
    IndexOutOfRange { index: usize, v: usize },

    #[error("invalid bitstring: {0}")]
    InvalidBitstring(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("zero variance on variable {0}")]
    ZeroVariance(usize),

    #[error("weights must have a positive sum")]
    ZeroWeights,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("component {component} is degenerate (effective size {n_eff:.3e})")]
    DegenerateComponent { component: usize, n_eff: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("not enough observations: {n} for {k} components")]
    TooFewObservations { n: usize, k: usize },

    #[error("every candidate fit failed: {0}")]
    AllFitsFailed(String),
}
