//! Error taxonomy shared by the whole engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("valuation error: {0}")]
    Valuation(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("a special point is irrational: {0}")]
    IrrationalSpecialPoint(String),
    #[error("key point {0} is not special")]
    KeyNotSpecial(String),
    #[error("nonzero residue where a total differential was expected: {0}")]
    ResidueNonZero(String),
    #[error("dx has no simple zero at {0}")]
    NotSimpleZero(String),
    #[error("working order failed to stabilize after escalation: {0}")]
    OrderDivergence(String),
    #[error("missing dependency: {0}")]
    MissingDependency(String),
    #[error("hypotheses violated: {0}")]
    HypothesisViolated(String),
    #[error("dual differential has a pole at a key point: {0}")]
    NonHolomorphicDual(String),
    #[error("curve is not in the trivial-dual regime: {0}")]
    NotTrivialDual(String),
    #[error("iterated primitive is not rational: {0}")]
    NonRationalPrimitive(String),
    #[error("multi-point key sets are not supported here: {0}")]
    MultiPointUnsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl EngineError {
    /// CLI exit code contract: 2 input error, 3 internal assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::ResidueNonZero(_) | EngineError::OrderDivergence(_) => 3,
            _ => 2,
        }
    }
}
