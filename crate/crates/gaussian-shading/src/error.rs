use thiserror::Error;

/// Errors shared across the watermarking toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity too small: {n_bits} bits cannot carry a {m_bits}-bit message")]
    CapacityTooSmall { n_bits: usize, m_bits: usize },

    #[error("bit string length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid bit value {value} at index {index}; bits must be 0 or 1")]
    InvalidBit { index: usize, value: u8 },

    #[error("message must not be empty")]
    EmptyMessage,

    #[error("entropy source failure: {0}")]
    EntropyFailure(String),

    #[error("probability {value} out of domain {domain}")]
    ProbabilityDomain { value: f64, domain: &'static str },

    #[error("latent values must be finite (offending index {index})")]
    NonFiniteLatent { index: usize },

    #[error("latent must have at least one dimension")]
    EmptyLatent,

    #[error("window bits-per-dimension must be in 1..=16, got {0}")]
    InvalidWindow(u8),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("binomial domain violation: k={k}, n={n}")]
    BinomialDomain { k: u64, n: u64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("numerical overflow during diffusion step {step}")]
    NumericalOverflow { step: usize },

    #[error("channel specification invalid: {0}")]
    InvalidChannel(String),

    #[error("channel does not apply to this carrier: {0}")]
    ChannelCarrierMismatch(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("refusing to overwrite existing file {0} (pass --force)")]
    FileExists(String),

    #[error("invalid hex field {field}: {reason}")]
    InvalidHex { field: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
