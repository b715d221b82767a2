use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("index {index} out of range for J_{k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("dimension mismatch: expected K = {expected}, got K = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension K = {k} exceeds the limit {limit} for this operation")]
    DimensionTooLarge { k: usize, limit: usize },

    #[error("chain is not strictly increasing at position {position}")]
    ChainNotIncreasing { position: usize },

    #[error("chain needs at least {needed} steps, got {found}")]
    ChainTooShort { needed: usize, found: usize },

    #[error("cycle is invalid: {0}")]
    InvalidCycle(String),

    #[error("input is not a violation: gap {index} is below epsilon")]
    NotAViolation { index: usize },

    #[error("no candidate block vector gives a strict violation (boundary instance)")]
    WitnessNotStrict,

    #[error("basis matrix is singular")]
    SingularBasis,

    #[error("vector is zero")]
    ZeroVector,

    #[error("atom {atom} is degenerate: {what} vanishes")]
    DegenerateAtom { atom: usize, what: &'static str },

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("functional takes an irrational value on atom {atom}")]
    IrrationalFunctional { atom: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("budget must be positive")]
    InvalidBudget,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
