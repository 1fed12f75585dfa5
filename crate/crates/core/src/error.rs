use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tagging error: {0}")]
    Tagging(String),
    #[error("region error: {0}")]
    Region(String),
    #[error("assembly error: element {element} has non-positive coefficient {value}")]
    Assembly { element: usize, value: f64 },
    #[error("index error: node {index} out of range (mesh has {len} nodes)")]
    Index { index: usize, len: usize },
    #[error("constraint error: dof {dof} prescribed as both {first} and {second}")]
    Constraint { dof: usize, first: f64, second: f64 },
    #[error("boundary error: {0}")]
    Boundary(String),
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },
    #[error("degenerate sensitivity: integral of |J'| vanishes")]
    DegenerateSensitivity,
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("measurement error: {0}")]
    Measurement(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("divergence at iteration {iteration}: non-finite objective")]
    Divergence { iteration: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ (Error::AtIteration { .. } | Error::Divergence { .. }) => e,
            e => Error::AtIteration {
                iteration,
                source: alloc::boxed::Box::new(e),
            },
        }
    }

    /// The underlying error with any iteration context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }
}
