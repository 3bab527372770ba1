use thiserror::Error;

/// Errors raised by the simulator, the differentiators and the trainers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::qstate::MAX_QUBITS)]
    QubitCount(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("two-qubit gate needs distinct qubits, got ({0}, {0})")]
    SameQubit(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid circuit structure: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
