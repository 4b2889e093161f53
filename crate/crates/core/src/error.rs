use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point outside the region where a lift is defined.
    #[error("point {point:?} is outside the lift domain: {reason}")]
    LiftDomain { point: [f64; 3], reason: String },

    #[error("cell {cell} is degenerate (area element {area_element:e})")]
    DegenerateCell { cell: usize, area_element: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("shifted solve failed at sinc node {node}: {source}")]
    NodeSolve {
        node: i64,
        #[source]
        source: Box<Error>,
    },

    /// Carries the best iterate so the caller can decide what to do with it.
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
