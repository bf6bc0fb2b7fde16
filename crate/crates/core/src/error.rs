use alloc::string::String;

/// Errors raised by problem oracles, samplers and optimizers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Indices are zero-based internally.
    #[error("component index {index} out of range for {n} components")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate index {0} in batch")]
    DuplicateIndex(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A non-finite value appeared in the iterate or an optimizer buffer.
    #[error("diverged at iteration {iteration}")]
    Diverged { iteration: u64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = core::result::Result<T, Error>;
