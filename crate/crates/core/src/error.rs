use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two tensors (or a tensor and a config) disagree on shape.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch {
        /// What the operation required.
        expected: String,
        /// What it received.
        actual: String,
    },
    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// An operation was handed an empty batch, dataset or model list.
    #[error("empty input: {0}")]
    Empty(&'static str),
    /// A configuration or argument constraint does not hold.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// A partitioner could not produce a valid split.
    #[error("partition failed: {0}")]
    Partition(String),
    /// A client id outside the known population.
    #[error("unknown client id {0}")]
    UnknownClient(usize),
}

/// Result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
