use thiserror::Error;

/// Errors raised by the convolution engine and its helpers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid layer configuration: {0}")]
    InvalidConfig(String),

    #[error("value {0} exceeds the binary16 range")]
    Fp16Overflow(String),

    #[error("no built-in algorithm for F({m},{r}); use the generator")]
    UnsupportedAlgorithm { m: usize, r: usize },

    #[error("transform flop counts are not profiled for F({m},{r})")]
    NotProfiled { m: usize, r: usize },

    #[error("invalid point set: {0}")]
    InvalidPoints(String),

    #[error("unsupported tile size {0}")]
    UnsupportedTile(usize),
}

pub type Result<T, E = ConvError> = std::result::Result<T, E>;
