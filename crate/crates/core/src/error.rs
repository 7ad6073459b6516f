use thiserror::Error;

/// Errors raised by the encoding, simulation and decoding stages.
///
/// Recoverable data problems (an uncorrectable block, a CRC mismatch) are not
/// errors; they are reported through [`crate::decode::DecodeReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("value {value} out of range (must be < {limit})")]
    OutOfRange { value: u64, limit: u64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("insufficient primers: need {need}, have {have}")]
    InsufficientPrimers { need: usize, have: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("manifest mismatch: {0}")]
    Manifest(String),
    #[error("read {0} carries no provenance")]
    MissingProvenance(usize),
    #[error("unknown extent {0}")]
    UnknownExtent(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
