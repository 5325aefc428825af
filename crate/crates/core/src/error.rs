use thiserror::Error;

use crate::fusion::IrrepLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label {0} is not in the ring's index set")]
    UnknownLabel(IrrepLabel),

    #[error("fusion table has no entry for the pair ({0}, {1})")]
    TableIncomplete(IrrepLabel, IrrepLabel),

    #[error("invalid fusion ring: {0}")]
    InvalidRing(String),

    #[error("invalid subset sequence: {0}")]
    InvalidSequence(String),

    #[error("sequence index {n} is outside the declared range 1..={len}")]
    IndexOutOfRange { n: usize, len: usize },

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid group data: {0}")]
    InvalidGroup(String),

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("witness label {0} is not certified to fix the sequence")]
    WitnessNotInStabilizer(IrrepLabel),

    #[error("witness pair does not relate the two vectors (residual {residual:e})")]
    WitnessMismatch { residual: f64 },

    #[error("element {0} is not certified to fix the sequence")]
    WitnessNotFixing(String),

    #[error("spectral model error: {0}")]
    Model(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
