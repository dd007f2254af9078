use thiserror::Error;

use crate::coupling::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} modes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("theta rule with {nodes} nodes is too coarse, need at least {required}")]
    RuleTooCoarse { nodes: usize, required: usize },

    #[error("quadratic form is negative ({0:e}); operator is not positive")]
    NegativeQuadraticForm(f64),

    #[error("non-finite state at step {step} (t = {time})")]
    NumericalAbort { step: usize, time: f64 },

    #[error("trajectory has {got} samples, need at least {required}")]
    TooFewSamples { got: usize, required: usize },

    #[error("trajectory sampling too coarse: step {step:e} exceeds {limit:e}")]
    UnderSampled { step: f64, limit: f64 },

    #[error("sample times of the two trajectories do not match")]
    TimeGridMismatch,

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
