//! Stabilizer states of `n` qubits in the destabilizer/stabilizer tableau form.

mod pauli;
mod tableau;

pub use pauli::PauliOperator;
pub use tableau::{FixtureGate, MeasurementOutcome, Tableau};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StabilizerError {
    #[error("a tableau needs at least one qubit")]
    EmptyRegister,
    #[error("qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    RepeatedQubit(usize),
    #[error("Pauli length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot parse Pauli string {0:?}")]
    Parse(String),
    #[error("unknown fixture gate {0:?}")]
    UnknownGate(String),
    #[error("tableau invariant violated: {0}")]
    Invalid(String),
}
