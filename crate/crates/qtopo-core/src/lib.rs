/*!
Simulation and analysis toolkit for small entanglement-based qubit networks.

The crate covers the full pipeline from states to conclusions:

* dense density-matrix simulation of few-qubit networks (sources, per-qubit
  noise channels, local frame rotations),
* projective measurements in a pair of mutually unbiased bases per qubit,
* entropic and covariance correlation measures between qubits and nodes,
* variational optimization of measurement frames,
* inference of the network topology from a qubit-wise uncertainty matrix and
  exact source counting between nodes,
* quantum error mitigation: probabilistic error cancellation, virtual
  distillation, and shadow distillation.

Matrices use big-endian qubit indexing throughout: the first qubit of a
register maps to the most significant bit of a basis-state index.

With the default `parallel` feature, entry- and trial-level loops run on the
rayon thread pool; without it every code path is sequential.
*/

pub mod error;
pub mod exec;
pub mod infer;
pub mod info;
pub mod measure;
pub mod network;
pub mod optimize;
pub mod qem;
pub mod qstate;
pub mod rng;

pub use error::{Error, Result};

/// Tolerance used for state invariants (trace, Hermiticity, eigenvalue floor).
pub const STATE_TOL: f64 = 1e-9;

/// Probabilities below this are clamped before entering a logarithm.
pub const LOG_CLAMP: f64 = 1e-12;
