use thiserror::Error;

use crate::valuation::Val;

/// Errors raised by the arithmetic layers and the descent engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KisinError {
    #[error("division by a certified zero")]
    DivisionByZero,

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("value is indeterminate at the available precision: {0}")]
    IndeterminateAtPrecision(String),

    #[error("series truncation at degree {requested} needs working degree >= {requested}, have {available}")]
    InsufficientDegree { requested: usize, available: usize },

    #[error("not a unit of the disc ring: {0}")]
    NotAUnit(String),

    #[error("incompatible ring parameters: {0}")]
    ParameterMismatch(String),

    #[error("exact division by u^{shift} failed: coefficient of u^{degree} is not exactly zero")]
    MonomialDivisionFailure { shift: usize, degree: usize },

    #[error("matrix is not allowable: entry {entry:?} has v_R >= {certified} only")]
    NotAllowable { entry: (usize, usize), certified: Val },

    #[error("descent round made no certified progress: eps went {before} -> {after}, needed {needed}")]
    NoProgress { before: Val, after: Val, needed: Val },

    #[error("descent did not terminate within {0} rounds")]
    NonTermination(usize),

    #[error("invalid parameters: {0}")]
    ParameterViolation(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("check failed: {0}")]
    CheckFailure(String),

    #[error("not integral: {0}")]
    NotIntegral(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl KisinError {
    /// True for the failures that more working precision can cure.
    pub fn is_precision_failure(&self) -> bool {
        matches!(
            self,
            KisinError::PrecisionExhausted(_)
                | KisinError::IndeterminateAtPrecision(_)
                | KisinError::NoProgress { .. }
                | KisinError::NonTermination(_)
                | KisinError::InsufficientDegree { .. }
        )
    }
}

pub type Result<T, E = KisinError> = std::result::Result<T, E>;
