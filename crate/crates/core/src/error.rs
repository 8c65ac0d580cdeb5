use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("objective returned non-finite loss {value} at sample {sample}")]
    Evaluation { sample: usize, value: f64 },

    #[error("importance weights degenerate: every weight underflows")]
    DegenerateWeights,

    #[error("target ESS {target} infeasible: achievable range is [{lower}, {upper}]")]
    InfeasibleTarget { target: f64, lower: f64, upper: f64 },

    #[error("point is at the projection pole (|1 - v_p| = {0:e})")]
    Pole(f64),

    #[error("quadrature oracle supports dimensions 1..=3, got {0}")]
    UnsupportedDimension(usize),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("dataset must contain both classes ({n_plus} positives out of {n_data})")]
    SingleClass { n_plus: usize, n_data: usize },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: u64) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
