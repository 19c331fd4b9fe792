use thiserror::Error;

use crate::traversal::TraversalPath;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A pre-activation sits within the boundary tolerance of zero, so the
    /// Jacobian is not defined there. Callers may perturb the point and retry.
    #[error(
        "point lies on a partition boundary: layer {layer}, unit {unit}, \
         pre-activation {value:e} (tolerance {tol:e})"
    )]
    Boundary {
        layer: usize,
        unit: usize,
        value: f64,
        tol: f64,
    },

    #[error("rank deficiency: singular value {index} is {sigma:e}, not above threshold {threshold:e}")]
    RankDeficient {
        index: usize,
        sigma: f64,
        threshold: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("under-sampled: need more than {required} samples, got {got}")]
    UnderSampled { required: usize, got: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Iterative traversal stopped early; the completed part of the path is kept.
    #[error("traversal aborted after {} of {} steps: {source}", partial.n_steps_taken(), planned_steps)]
    TraversalAborted {
        partial: Box<TraversalPath>,
        planned_steps: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            got,
        }
    }
}
