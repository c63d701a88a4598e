use thiserror::Error;

use crate::ingest::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// How an error should be surfaced to a caller that maps failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed documents, failed validation, dimension mismatches.
    Input,
    /// The numerics contradicted a structural guarantee.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error in {context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("2-form is singular (rank {rank} < {dim})")]
    SingularForm { rank: usize, dim: usize },
    #[error("point is not on stratum {stratum} (residual {residual:.3e})")]
    PointNotOnStratum { stratum: usize, residual: f64 },
    #[error("stratum {stratum} is not immersed at the point (Jacobian rank {rank}, expected {expected})")]
    SingularJacobian {
        stratum: usize,
        rank: usize,
        expected: usize,
    },
    #[error("genericity violation: {0}")]
    GenericityViolation(String),
    #[error("direct sum splitting is degenerate: {0}")]
    DegenerateSplitting(String),
    #[error("cross block C is singular (|det C| = {det:.3e})")]
    SingularC { det: f64 },
    #[error("spectra of the two routes disagree (residual {residual:.3e})")]
    RouteMismatch { residual: f64 },
    #[error("eigenvalue {value} has no partner within tolerance")]
    UnpairedEigenvalue { value: String },
    #[error("spectrum is degenerate: {distinct} distinct values, {expected} required")]
    DegenerateSpectrum { distinct: usize, expected: usize },
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),
    #[error("restriction of the form to Q is degenerate (rank {rank} < {dim})")]
    DegenerateRestriction { rank: usize, dim: usize },
    #[error("invalid normal form spec: {0}")]
    InvalidSpec(String),
    #[error("round trip failed on {quantity}: {detail}")]
    RoundtripFailure { quantity: String, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Eval(_)
            | Error::PointNotOnStratum { .. }
            | Error::SingularJacobian { .. }
            | Error::SingularForm { .. }
            | Error::DimensionMismatch(_)
            | Error::OutOfRange(_)
            | Error::WrongRegime(_)
            | Error::InvalidSpec(_)
            | Error::Io(_) => ErrorClass::Input,
            Error::GenericityViolation(_)
            | Error::DegenerateSplitting(_)
            | Error::SingularC { .. }
            | Error::RouteMismatch { .. }
            | Error::UnpairedEigenvalue { .. }
            | Error::DegenerateSpectrum { .. }
            | Error::NoConvergence(_)
            | Error::NewtonDivergence(_)
            | Error::DegenerateRestriction { .. }
            | Error::RoundtripFailure { .. } => ErrorClass::Internal,
        }
    }
}
