//! Quantum error mitigation: probabilistic error cancellation (PEC), virtual
//! distillation (VD), and shadow distillation (SD), plus the simplex
//! projection shared by their shot-noise paths.

mod pec;
mod shadow;
mod simplex;
mod vd;

pub use pec::{
    pec_mitigated_probabilities, pec_phase_damping, pec_quasi_exact, pec_quasi_sampled, PecMode,
    QuasiDecomposition, QuasiProbabilityVector,
};
pub use shadow::{
    collect_snapshots, sd_expectation, sd_mitigated_probabilities, ShadowSnapshot,
};
pub use simplex::project_to_simplex;
pub use vd::{b_gate, d_gate, vd_mitigated_probabilities, vd_renyi2_pair, VdMode, VdRenyi2};
