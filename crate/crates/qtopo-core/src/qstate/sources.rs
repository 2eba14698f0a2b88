use serde::{Deserialize, Serialize};

use super::state::{CVec, PureState, C};
use crate::error::{Error, Result};

/// Maximum qubits in a single source state (and, transitively, in a network
/// handled by the dense simulator).
pub const MAX_QUBITS: usize = 10;

/// The entangled states a network source can distribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    /// (|0...0> + |1...1>)/sqrt(2) on m >= 2 qubits.
    Ghz(usize),
    /// Two-qubit GHZ state (|00> + |11>)/sqrt(2).
    Epr,
    /// (|001> + |010> + |100>)/sqrt(3).
    W3,
    /// cos(angle)|00> + sin(angle)|11>, angle in [0, pi/2).
    GeneralizedEpr { angle: f64 },
}

impl SourceKind {
    pub fn arity(&self) -> usize {
        match self {
            SourceKind::Ghz(m) => *m,
            SourceKind::Epr | SourceKind::GeneralizedEpr { .. } => 2,
            SourceKind::W3 => 3,
        }
    }
}

/// Builds the source state on the given qubit ids. The id list length must
/// match the kind's arity.
pub fn make_source_state(kind: SourceKind, qubits: &[usize]) -> Result<PureState> {
    if qubits.len() != kind.arity() {
        return Err(Error::invalid(format!(
            "{kind:?} needs {} qubits, got {}",
            kind.arity(),
            qubits.len()
        )));
    }
    if qubits.len() > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "source over {} qubits exceeds the {MAX_QUBITS}-qubit simulator bound",
            qubits.len()
        )));
    }
    let d = 1usize << qubits.len();
    let mut amps = CVec::zeros(d);
    match kind {
        SourceKind::Ghz(m) => {
            if m < 2 {
                return Err(Error::invalid("GHZ source needs at least 2 qubits".to_string()));
            }
            let w = std::f64::consts::FRAC_1_SQRT_2;
            amps[0] = C::new(w, 0.0);
            amps[d - 1] = C::new(w, 0.0);
        }
        SourceKind::Epr => {
            let w = std::f64::consts::FRAC_1_SQRT_2;
            amps[0] = C::new(w, 0.0);
            amps[3] = C::new(w, 0.0);
        }
        SourceKind::W3 => {
            let w = 1.0 / 3.0_f64.sqrt();
            // |001>, |010>, |100>
            amps[1] = C::new(w, 0.0);
            amps[2] = C::new(w, 0.0);
            amps[4] = C::new(w, 0.0);
        }
        SourceKind::GeneralizedEpr { angle } => {
            if !(0.0..std::f64::consts::FRAC_PI_2).contains(&angle) {
                return Err(Error::invalid(format!(
                    "generalized-EPR angle {angle} outside [0, pi/2)"
                )));
            }
            amps[0] = C::new(angle.cos(), 0.0);
            amps[3] = C::new(angle.sin(), 0.0);
        }
    }
    PureState::new(amps, qubits.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ghz_amplitudes() {
        let s = make_source_state(SourceKind::Ghz(3), &[0, 1, 2]).unwrap();
        let w = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amplitudes()[0].re, w, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[7].re, w, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[3].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn w3_single_qubit_reduction() {
        let rho = make_source_state(SourceKind::W3, &[0, 1, 2])
            .unwrap()
            .to_density();
        let r = rho.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix()[(1, 1)].re, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn w3_pair_reduction_mixes_psi_plus() {
        // tr_3 |W><W| = |00><00|/3 + (2/3)|psi+><psi+|
        let rho = make_source_state(SourceKind::W3, &[0, 1, 2])
            .unwrap()
            .to_density();
        let r = rho.partial_trace(&[0, 1]).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix()[(1, 1)].re, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix()[(1, 2)].re, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix()[(3, 3)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn generalized_epr_angle_validation() {
        assert!(make_source_state(
            SourceKind::GeneralizedEpr { angle: std::f64::consts::FRAC_PI_2 },
            &[0, 1]
        )
        .is_err());
        let s = make_source_state(
            SourceKind::GeneralizedEpr { angle: std::f64::consts::FRAC_PI_8 },
            &[4, 5],
        )
        .unwrap();
        assert_abs_diff_eq!(
            s.amplitudes()[0].re,
            std::f64::consts::FRAC_PI_8.cos(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ghz_needs_two_qubits() {
        assert!(make_source_state(SourceKind::Ghz(1), &[0]).is_err());
    }
}
