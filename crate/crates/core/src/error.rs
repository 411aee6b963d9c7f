use thiserror::Error;

use crate::convex::SolveReport;
use crate::model::{DomainError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error("sample {index}: {source}")]
    SampleDomain { index: usize, source: DomainError },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("solver did not reach optimality ({:?} after {} iterations)", .0.status, .0.iterations)]
    Solver(Box<SolveReport>),

    #[error("{} of the points lie outside the polynomial domain box (first offenders: {:?}); enlarge the box or use an automatic box", .count, .indices)]
    PointsOutsideDomain { count: usize, indices: Vec<usize> },

    #[error("rejection sampler accepted {accepted} of {requested} points after {attempts} draws")]
    AcceptanceRate {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
