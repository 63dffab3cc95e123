use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {qubit} out of range for a {n}-qubit register")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("CNOT control and target must differ (both are {0})")]
    CnotSameQubit(usize),

    #[error("parameter vector has length {found}, circuit expects {expected}")]
    ParameterLength { expected: usize, found: usize },

    #[error("parameter index {index} out of range for {count} parameters")]
    ParameterIndexOutOfRange { index: usize, count: usize },

    #[error("invalid parameter slot {0}")]
    InvalidSlot(String),

    #[error("batch size must be at least 1")]
    ZeroShots,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {required} qubits, got {found}")]
    TooFewQubits { required: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("V-statistic degree must be at least 1")]
    InvalidDegree,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
