use thiserror::Error;

/// Errors raised anywhere in the selection pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("polytope has empty interior")]
    EmptyInterior,
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("too few contact points: found {found}, need at least {needed}")]
    ContactDeficit { found: usize, needed: usize },
    #[error("decomposition residual {0:.3e} above tolerance")]
    ResidualTooLarge(f64),
    #[error("input is not a decomposition of the identity (residual {0:.3e})")]
    InvalidDecomposition(f64),
    #[error("barrier method found no admissible vector at step {0}")]
    BarrierStall(usize),
    #[error("matrix does not dominate the identity (lambda_min = {0})")]
    NotDominatingIdentity(f64),
    #[error("target is not in the convex hull of the points")]
    NotInHull,
    #[error("origin is not in the interior of the convex hull")]
    OriginNotInterior,
    #[error("vertex enumeration budget exceeded: {0} subsets")]
    BudgetExceeded(u128),
    #[error("internal check failed: {0}")]
    InternalCheckFailed(String),
    #[error("report does not belong to this instance (expected {expected}, found {found})")]
    MismatchedInstance { expected: String, found: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
