use thiserror::Error;

use crate::literal::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("objects live in different contexts (p = {left} vs p = {right})")]
    ContextMismatch { left: u32, right: u32 },
    #[error("balls {0} and {1} overlap")]
    OverlappingParts(String, String),
    #[error("value kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid affine element: {0}")]
    InvalidAffine(String),
    #[error("invalid intensity measure: {0}")]
    InvalidMeasure(String),
    #[error("integral of a function with nonzero tail {0} over the whole space diverges")]
    UnboundedIntegral(String),
    #[error("window does not contain {0}")]
    WindowMismatch(String),
    #[error("no closed form for this cylinder function: {0}")]
    UnsupportedShape(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
