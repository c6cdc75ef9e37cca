use thiserror::Error;

use crate::codec::DecodeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus must lie in [2, 2^30], got {0}")]
    InvalidModulus(u64),

    #[error("residue {value} is outside [0, {q})")]
    ResidueOutOfRange { value: u64, q: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hamming weight {h} exceeds dimension {n}")]
    HammingTooLarge { h: usize, n: usize },

    #[error("not enough samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("malformed sample file at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sample file does not match requested parameters: {0}")]
    ParamsMismatch(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error("non-finite training loss {loss} at step {step}")]
    NonFiniteLoss { step: u64, loss: f32 },

    #[error("distinguisher needs a positive advantage, got acc {acc} with tau {tau}")]
    NonPositiveAdvantage { acc: f64, tau: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
