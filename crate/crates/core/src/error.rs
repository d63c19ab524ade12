use thiserror::Error;

use crate::lattice::DomainError;

/// Errors raised while evaluating right-hand sides or solving a system.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("unbound variable `{0}` in right-hand side")]
    UnboundVariable(String),
    #[error("no right-hand side for local unknown `{0}`")]
    MissingRhs(String),
    #[error("right-hand-side evaluation budget of {0} exceeded")]
    BudgetExceeded(u64),
    #[error("root `{0}` is not a local unknown")]
    InvalidRoot(String),
    #[error("`demand` targets `{0}`, which is not a local unknown")]
    InvalidDemand(String),
    #[error("`set` targets `{0}`, which is not a global unknown")]
    InvalidSide(String),
    #[error("at least one root is required")]
    NoRoots,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("system cannot be serialized: {0}")]
    NotSerializable(String),
    #[error("oracle did not stabilize within {0} rounds")]
    OracleDiverged(u64),
    #[error("solver aborted because another worker failed")]
    Aborted,
    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
