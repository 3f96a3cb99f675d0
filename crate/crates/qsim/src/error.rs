use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsimError {
    #[error("qubit index {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("a two-qubit operation needs two distinct qubits (got {0} twice)")]
    SameQubit(usize),

    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("amplitude vector of length {0} is not a power of two")]
    InvalidLength(usize),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("requested measurement branch has zero probability")]
    ZeroProbability,

    #[error("qubit #{0} is not held by this memory")]
    UnknownQubit(u64),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("requested qubits do not form a complete register")]
    NotARegister,
}

pub type Result<T> = std::result::Result<T, QsimError>;
