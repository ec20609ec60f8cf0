use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid chart change: {0}")]
    InvalidChart(String),
    #[error("name collision: `{0}`")]
    NameCollision(String),
    #[error("shape mismatch: {0}")]
    Mismatch(String),
    #[error("empty sample grid")]
    EmptyGrid,
    #[error("parameter {lambda} lies outside the curve interval {interval}")]
    OutsideInterval { lambda: String, interval: String },
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("tangent representative is not vertical (u != 0)")]
    NotVertical,
    #[error("bundle structure: {0}")]
    Bundle(String),
    #[error("system is not injective on the parameters: {0}")]
    NotInjective(String),
    #[error("incompatible operator: {0}")]
    Incompatible(String),
    #[error("recipe is not of horizontal order 1: offending term `{0}`")]
    HorizontalOrder(String),
    #[error("not supported: {0}")]
    Unsupported(String),
}
