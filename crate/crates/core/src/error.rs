use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("ill-formed network constraint {0}")]
    IllFormed(String),
    #[error("unknown address in {0}; ground it first")]
    UnknownAddress(String),
    #[error("address universe of size {0} exceeds the supported maximum of 5")]
    UniverseTooLarge(usize),
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("unguarded recursion through `{0}`")]
    UnguardedRecursion(String),
    #[error("state budget of {0} states exceeded")]
    StateBudgetExceeded(usize),
    #[error("the two systems declare different universes")]
    UniverseMismatch,
    #[error("term is not finite-state: {0}")]
    NotFiniteState(String),
    #[error("the normal form of this {0}-state system is too large to write as one term")]
    NormalFormTooLarge(usize),
    #[error("invalid term: {0}")]
    Invalid(String),
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
