use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite state in path {path} at refined step {step}")]
    NonFiniteState { path: usize, step: usize },

    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in solver input")]
    NonFiniteInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("diffusion value {value} at x = {x} outside the declared bounds [{lower}, {upper}]")]
    EllipticityViolated {
        x: f64,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("degenerate path: observed states have zero standard deviation")]
    DegeneratePath,

    #[error("fit failed at dimension {dim}: {source}")]
    AtDimension {
        dim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("repetition {rep} failed: {source}")]
    AtRepetition {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_dimension(dim: usize, source: Error) -> Self {
        Error::AtDimension {
            dim,
            source: Box::new(source),
        }
    }

    pub(crate) fn at_repetition(rep: usize, source: Error) -> Self {
        Error::AtRepetition {
            rep,
            source: Box::new(source),
        }
    }
}
