use thiserror::Error;

use crate::rational::{ParseRationalError, Rational};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("privacy parameter t = {0} must satisfy t >= 1")]
    InvalidPrivacyParameter(Rational),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("matrix violates {} polytope constraint(s): {:?}", .violations.len(), .violations)]
    NotInPolytope { violations: Vec<usize> },

    #[error("column {0} is nonzero but has a zero entry")]
    DegenerateColumn(usize),

    #[error("operation requires t > 1")]
    RequiresStrictPrivacy,

    #[error("{what} is not supported for n = {n} (maximum {max})")]
    UnsupportedSize {
        what: &'static str,
        n: usize,
        max: usize,
    },

    #[error("candidate budget of {budget} exhausted after examining {examined} basis candidates")]
    BudgetExhausted { budget: u64, examined: u64 },

    #[error("vertex set is empty")]
    EmptyVertexSet,

    #[error(transparent)]
    Parse(#[from] ParseRationalError),
}
