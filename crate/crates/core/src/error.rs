use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("singular kernel: source and observation points are {distance:.3e} m apart")]
    SingularKernel { distance: f64 },

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded at scale {scale}: {unknowns} unknowns > budget {budget}")]
    Resource {
        scale: f64,
        unknowns: usize,
        budget: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
