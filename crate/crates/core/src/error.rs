use thiserror::Error;

/// Errors raised by the polynomial, Schur, relaxation and certificate layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("duplicate exponent {0} in term list")]
    DuplicateExponent(u32),
    #[error("non-finite coefficient for exponent {0}")]
    NonFiniteCoefficient(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("expansion budget exceeded: |lambda| = {size}, nvars = {nvars}")]
    BudgetExceeded { size: usize, nvars: usize },
    #[error("degenerate root pattern")]
    DegenerateRootPattern,
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid sparsity parameter k = {0}")]
    InvalidK(i64),
    #[error("use dense degree-2k cone: 2k = {two_k} exceeds degree {degree}")]
    UseDenseCone { two_k: usize, degree: usize },
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("solution not certifiable: min eigenvalue {0:e}")]
    NotCertifiable(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
