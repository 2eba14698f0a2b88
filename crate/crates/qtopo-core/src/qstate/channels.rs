use serde::{Deserialize, Serialize};

use super::gates::{identity2, pauli_x, pauli_y, pauli_z};
use super::state::{CMat, DensityMatrix, C};
use crate::error::{Error, Result};

/// Single-qubit noise channel specifications accepted in network configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// K0 = diag(1, sqrt(1-gamma)), K1 = |1><1| sqrt(gamma); gamma in [0, 1].
    PhaseDamping { gamma: f64 },
    /// K0 = sqrt(1-gamma) I, K_i = sqrt(gamma/3) sigma_i; gamma in [0, 3/4].
    Depolarizing { gamma: f64 },
    /// rho -> p rho + (1-p) I/d on its targets; p in [0, 1].
    WhiteNoise { p: f64 },
}

/// What a channel spec lowers to: a Kraus set or a state-mixing map.
#[derive(Debug, Clone)]
pub enum ChannelOp {
    Kraus(Vec<CMat>),
    Mix(f64),
}

impl NoiseSpec {
    /// Lowers the spec to an applicable operation, validating parameter
    /// ranges.
    pub fn to_op(self) -> Result<ChannelOp> {
        match self {
            NoiseSpec::PhaseDamping { gamma } => {
                if !(0.0..=1.0).contains(&gamma) {
                    return Err(Error::invalid(format!(
                        "phase-damping gamma = {gamma} outside [0, 1]"
                    )));
                }
                let mut k0 = identity2();
                k0[(1, 1)] = C::new((1.0 - gamma).sqrt(), 0.0);
                let mut k1 = CMat::zeros(2, 2);
                k1[(1, 1)] = C::new(gamma.sqrt(), 0.0);
                Ok(ChannelOp::Kraus(vec![k0, k1]))
            }
            NoiseSpec::Depolarizing { gamma } => {
                if !(0.0..=0.75).contains(&gamma) {
                    return Err(Error::invalid(format!(
                        "depolarizing gamma = {gamma} outside [0, 3/4]"
                    )));
                }
                let w = (gamma / 3.0).sqrt();
                let scale = |m: CMat, f: f64| m * C::new(f, 0.0);
                Ok(ChannelOp::Kraus(vec![
                    scale(identity2(), (1.0 - gamma).sqrt()),
                    scale(pauli_x(), w),
                    scale(pauli_y(), w),
                    scale(pauli_z(), w),
                ]))
            }
            NoiseSpec::WhiteNoise { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!("white-noise p = {p} outside [0, 1]")));
                }
                Ok(ChannelOp::Mix(p))
            }
        }
    }

    /// Applies the channel to `targets` of `rho`. Kraus channels are
    /// single-qubit and act on each target independently; white noise mixes
    /// the joint reduced state of all targets at once.
    pub fn apply(self, rho: &mut DensityMatrix, targets: &[usize]) -> Result<()> {
        match self.to_op()? {
            ChannelOp::Kraus(ks) => {
                for &t in targets {
                    rho.apply_kraus(&ks, &[t])?;
                }
                Ok(())
            }
            ChannelOp::Mix(p) => rho.mix_with_noise(p, targets),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{make_source_state, SourceKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn phase_damping_scales_offdiagonals() {
        let gamma = 0.3;
        let mut rho = make_source_state(SourceKind::Epr, &[0, 1])
            .unwrap()
            .to_density();
        NoiseSpec::PhaseDamping { gamma }.apply(&mut rho, &[1]).unwrap();
        // |00><11| coherence picks up sqrt(1-gamma) per damped qubit
        assert_abs_diff_eq!(
            rho.matrix()[(0, 3)].re,
            0.5 * (1.0 - gamma).sqrt(),
            epsilon = 1e-12
        );
        NoiseSpec::PhaseDamping { gamma }.apply(&mut rho, &[0]).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 3)].re, 0.5 * (1.0 - gamma), epsilon = 1e-12);
        rho.validate().unwrap();
    }

    #[test]
    fn depolarizing_pair_matches_compact_form() {
        // both qubits depolarized: E(rho) = (1-4g/3)^2 rho + (6g-4g^2)/9 I
        let gamma = 0.2;
        let phi = make_source_state(SourceKind::Epr, &[0, 1])
            .unwrap()
            .to_density();
        let mut noisy = phi.clone();
        NoiseSpec::Depolarizing { gamma }
            .apply(&mut noisy, &[0, 1])
            .unwrap();
        let a = 1.0 - 4.0 * gamma / 3.0;
        let c = (6.0 * gamma - 4.0 * gamma * gamma) / 9.0;
        for r in 0..4 {
            for co in 0..4 {
                let expected = phi.matrix()[(r, co)] * C::new(a * a, 0.0)
                    + if r == co { C::new(c, 0.0) } else { C::new(0.0, 0.0) };
                assert_abs_diff_eq!((noisy.matrix()[(r, co)] - expected).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gamma_ranges_are_enforced() {
        assert!(NoiseSpec::Depolarizing { gamma: 0.8 }.to_op().is_err());
        assert!(NoiseSpec::PhaseDamping { gamma: -0.1 }.to_op().is_err());
        assert!(NoiseSpec::WhiteNoise { p: 1.5 }.to_op().is_err());
    }
}
