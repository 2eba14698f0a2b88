//! Dense quantum states over labeled qubits, gates, channels, and the
//! entangled source states a network distributes.

mod channels;
mod gates;
mod sources;
mod state;

pub use channels::{ChannelOp, NoiseSpec};
pub use gates::{hadamard, identity2, measurement_unitary, pauli_x, pauli_y, pauli_z, ry, rz};
pub use sources::{make_source_state, SourceKind, MAX_QUBITS};
pub use state::{CMat, CVec, DensityMatrix, PureState, C};
