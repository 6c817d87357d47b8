use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Zero rate variance; callers fall back to a Poisson or point mass.
    #[error("degenerate moments: {0}")]
    Degenerate(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("target of {target} patients is unreachable: {reason}")]
    Unreachable { target: u64, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("search space of {dim:.3e} allocations exceeds the ceiling {ceiling:.3e}")]
    DimensionCeiling { dim: f64, ceiling: f64 },

    #[error("stepwise linearisation did not stabilise after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("no population member satisfies the success probability {0}")]
    NoFeasibleMember(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
