use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series diverges at y = {value} (radius of convergence {radius})")]
    Divergence { value: f64, radius: f64 },

    #[error("series terms grew for {run} consecutive indices ending at degree {degree}; treating as divergent")]
    RunawayTerms { degree: usize, run: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degree-{degree} term has zero kernel coefficient and cannot be learned")]
    UnlearnableTerm { degree: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Gram matrix is singular: inputs {first} and {second} are identical")]
    SingularGram { first: usize, second: usize },

    #[error("Gram matrix is ill-conditioned (smallest eigenvalue estimate {lambda_min:e}); factorization failed at every jitter level")]
    IllConditioned { lambda_min: f64 },

    #[error("coincident bodies {first} and {second}")]
    CoincidentBodies { first: usize, second: usize },

    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot normalize: {0}")]
    Normalization(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
