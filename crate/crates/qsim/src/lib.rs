//! Minimal statevector simulator: state preparation, Pauli and `T` gates,
//! Bell-basis and single-qubit-basis measurement with collapse.
//!
//! Measured qubits are projected out of their register, so a register only
//! ever holds qubits that are still alive.

pub mod error;
pub mod gate;
pub mod memory;
pub mod state;

pub use error::{QsimError, Result};
pub use gate::{t_gate, Matrix2, Pauli};
pub use memory::{QuantumMemory, Qubit};
pub use state::{
    prepare_computational, prepare_epr, prepare_message_qubit_improved,
    prepare_message_qubit_original, states_equal_up_to_phase, teleport_correction, BellOutcome,
    EncodingBasis, MeasurementBasis, StateVector, NORM_TOLERANCE,
};
