use thiserror::Error;

use crate::connection::ConnectionError;
use crate::diagonal::DiagonalError;
use crate::exterior::ExteriorError;
use crate::flagspace::FlagError;
use crate::kernels::KernelError;
use crate::quadrature::QuadError;
use crate::weights::WeightError;

/// Any failure raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Flag(#[from] FlagError),
    #[error(transparent)]
    Diagonal(#[from] DiagonalError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("unsupported instance: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{term}: {source}")]
    Term { term: String, source: Box<Error> },
}

impl Error {
    /// Attributes a failure to one term of an experiment.
    pub fn in_term(self, term: &str) -> Error {
        Error::Term { term: term.to_string(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
