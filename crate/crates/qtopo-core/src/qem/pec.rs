//! Probabilistic error cancellation for per-qubit phase damping.
//!
//! The inverse of a phase-damping channel with rate `gamma` is a
//! quasi-probability mixture of the identity and a Z conjugation. Measuring
//! every Z-insertion variant and combining the outcome distributions with the
//! signed weights cancels the channel in expectation.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::{born_probabilities, sample_counts, MeasurementFrame, OutcomeDistribution};
use crate::qem::simplex::project_to_simplex;
use crate::qstate::{pauli_z, DensityMatrix};

/// Signed one-qubit weights inverting a phase-damping channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiDecomposition {
    /// Weight on the identity insertion. Always positive.
    pub w_id: f64,
    /// Weight on the Z insertion. Nonpositive; zero only at `gamma = 0`.
    pub w_z: f64,
}

impl QuasiDecomposition {
    /// Sampling overhead of the decomposition, `|w_id| + |w_z| = 1/sqrt(1-gamma)`.
    pub fn one_norm(&self) -> f64 {
        self.w_id.abs() + self.w_z.abs()
    }
}

/// Weights `w_id = (1+s)/(2s)`, `w_z = -(1-s)/(2s)` with `s = sqrt(1-gamma)`.
///
/// They satisfy `w_id + w_z = 1` exactly and invert phase damping at rate
/// `gamma`. The channel is not invertible at `gamma = 1`.
pub fn pec_phase_damping(gamma: f64) -> Result<QuasiDecomposition> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!(
            "phase damping rate {gamma} outside invertible range [0, 1)"
        )));
    }
    let s = (1.0 - gamma).sqrt();
    Ok(QuasiDecomposition {
        w_id: (1.0 + s) / (2.0 * s),
        w_z: -(1.0 - s) / (2.0 * s),
    })
}

/// Signed combination of outcome distributions. Entries may be negative but
/// always sum to one (within floating-point roundoff in exact mode, and by
/// construction in shot mode).
#[derive(Debug, Clone)]
pub struct QuasiProbabilityVector {
    values: Vec<f64>,
    qubits: Vec<usize>,
}

impl QuasiProbabilityVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Nearest valid distribution in Euclidean norm.
    pub fn project(&self) -> Result<OutcomeDistribution> {
        OutcomeDistribution::new(project_to_simplex(&self.values), self.qubits.clone())
    }
}

/// How the variant distributions are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PecMode {
    /// Exact Born probabilities for every variant.
    Exact,
    /// Sample each variant; `total` shots are allocated across variants in
    /// proportion to the magnitude of their weights.
    Shots { total: u64 },
}

/// One circuit variant: the qubits that get a Z inserted, with its weight.
type Variant = (Vec<usize>, f64);

/// Z-insertion variants over the measured qubits that carry a nonzero rate,
/// with their product weights. The weights sum to one.
fn variants(
    subset: &[usize],
    gammas: &BTreeMap<usize, f64>,
) -> Result<(Vec<usize>, Vec<Variant>)> {
    let mut noisy = Vec::new();
    let mut decomps = Vec::new();
    for &q in subset {
        if let Some(&g) = gammas.get(&q) {
            if g > 0.0 {
                noisy.push(q);
                decomps.push(pec_phase_damping(g)?);
            }
        }
    }
    let mut out = Vec::with_capacity(1 << noisy.len());
    for mask in 0..(1usize << noisy.len()) {
        let mut weight = 1.0;
        let mut inserted = Vec::new();
        for (pos, (&q, d)) in noisy.iter().zip(&decomps).enumerate() {
            if mask >> pos & 1 == 1 {
                weight *= d.w_z;
                inserted.push(q);
            } else {
                weight *= d.w_id;
            }
        }
        out.push((inserted, weight));
    }
    Ok((noisy, out))
}

fn variant_distribution(
    rho: &DensityMatrix,
    inserted: &[usize],
    frame: &MeasurementFrame,
    subset: &[usize],
) -> Result<OutcomeDistribution> {
    let mut state = rho.clone();
    let z = pauli_z();
    for &q in inserted {
        state.apply_unitary(&z, &[q])?;
    }
    born_probabilities(&state, frame, subset)
}

/// Exact signed combination: equals the noiseless Born distribution when
/// `rho` differs from the ideal state by phase damping at exactly the given
/// per-qubit rates.
pub fn pec_quasi_exact(
    rho: &DensityMatrix,
    gammas: &BTreeMap<usize, f64>,
    frame: &MeasurementFrame,
    subset: &[usize],
) -> Result<QuasiProbabilityVector> {
    let (_, vars) = variants(subset, gammas)?;
    let mut values = vec![0.0; 1 << subset.len()];
    for (inserted, weight) in &vars {
        let dist = variant_distribution(rho, inserted, frame, subset)?;
        for (v, p) in values.iter_mut().zip(dist.probs()) {
            *v += weight * p;
        }
    }
    Ok(QuasiProbabilityVector {
        values,
        qubits: subset.to_vec(),
    })
}

/// Largest-remainder allocation of `total` shots proportional to `weights`
/// magnitudes, with at least one shot per variant so every signed weight
/// enters the combination.
fn allocate_shots(weights: &[f64], total: u64) -> Result<Vec<u64>> {
    let n = weights.len() as u64;
    if total < n {
        return Err(Error::invalid(format!(
            "shot budget {total} smaller than the {n} error-cancellation variants"
        )));
    }
    let norm: f64 = weights.iter().map(|w| w.abs()).sum();
    let spare = total - n;
    let targets: Vec<f64> = weights
        .iter()
        .map(|w| spare as f64 * w.abs() / norm)
        .collect();
    let mut alloc: Vec<u64> = targets.iter().map(|t| t.floor() as u64).collect();
    let assigned: u64 = alloc.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = targets[a] - targets[a].floor();
        let rb = targets[b] - targets[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take((spare - assigned) as usize) {
        alloc[i] += 1;
    }
    for a in &mut alloc {
        *a += 1;
    }
    Ok(alloc)
}

/// Shot-noise estimate of the signed combination. Each variant's empirical
/// distribution is scaled by its exact weight, so the entries still sum to
/// one even at finite shots.
pub fn pec_quasi_sampled(
    rho: &DensityMatrix,
    gammas: &BTreeMap<usize, f64>,
    frame: &MeasurementFrame,
    subset: &[usize],
    total: u64,
    rng: &mut ChaCha8Rng,
) -> Result<QuasiProbabilityVector> {
    let (_, vars) = variants(subset, gammas)?;
    let weights: Vec<f64> = vars.iter().map(|(_, w)| *w).collect();
    let alloc = allocate_shots(&weights, total)?;
    let mut values = vec![0.0; 1 << subset.len()];
    for ((inserted, weight), shots) in vars.iter().zip(&alloc) {
        let dist = variant_distribution(rho, inserted, frame, subset)?;
        let empirical = sample_counts(&dist, *shots, rng)?;
        for (v, p) in values.iter_mut().zip(empirical.probs()) {
            *v += weight * p;
        }
    }
    Ok(QuasiProbabilityVector {
        values,
        qubits: subset.to_vec(),
    })
}

/// Error-cancelled outcome distribution over `subset`, along with the raw
/// signed combination it was projected from.
pub fn pec_mitigated_probabilities(
    rho: &DensityMatrix,
    gammas: &BTreeMap<usize, f64>,
    frame: &MeasurementFrame,
    subset: &[usize],
    mode: PecMode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(OutcomeDistribution, QuasiProbabilityVector)> {
    let quasi = match mode {
        PecMode::Exact => pec_quasi_exact(rho, gammas, frame, subset)?,
        PecMode::Shots { total } => {
            let rng = rng.ok_or_else(|| {
                Error::invalid("shot mode requires a random number generator")
            })?;
            pec_quasi_sampled(rho, gammas, frame, subset, total, rng)?
        }
    };
    Ok((quasi.project()?, quasi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::BasisType;
    use crate::qstate::{make_source_state, NoiseSpec, SourceKind};
    use crate::rng::{substream, Domain};
    use approx::assert_abs_diff_eq;

    fn damped_epr(gamma: f64) -> (DensityMatrix, DensityMatrix) {
        let clean = make_source_state(SourceKind::Epr, &[0, 1])
            .unwrap()
            .to_density();
        let mut noisy = clean.clone();
        NoiseSpec::PhaseDamping { gamma }
            .apply(&mut noisy, &[0, 1])
            .unwrap();
        (clean, noisy)
    }

    #[test]
    fn weights_sum_to_one_and_match_closed_form() {
        let d = pec_phase_damping(0.3).unwrap();
        let s = 0.7f64.sqrt();
        assert_abs_diff_eq!(d.w_id, (1.0 + s) / (2.0 * s), epsilon = 1e-15);
        assert_abs_diff_eq!(d.w_z, -(1.0 - s) / (2.0 * s), epsilon = 1e-15);
        assert_abs_diff_eq!(d.w_id + d.w_z, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.one_norm(), 1.0 / s, epsilon = 1e-15);
        assert!(pec_phase_damping(1.0).is_err());
    }

    #[test]
    fn exact_combination_recovers_noiseless_distribution() {
        let (clean, noisy) = damped_epr(0.3);
        let gammas: BTreeMap<usize, f64> = [(0, 0.3), (1, 0.3)].into();
        for basis in [BasisType::Ztype, BasisType::Xtype] {
            let theta = [0.4, 1.1, -0.2];
            let frame = MeasurementFrame::from_angles(&[(0, theta), (1, theta)], basis);
            let ideal = born_probabilities(&clean, &frame, &[0, 1]).unwrap();
            let (mitigated, quasi) =
                pec_mitigated_probabilities(&noisy, &gammas, &frame, &[0, 1], PecMode::Exact, None)
                    .unwrap();
            assert_abs_diff_eq!(quasi.sum(), 1.0, epsilon = 1e-12);
            for (a, b) in mitigated.probs().iter().zip(ideal.probs()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sampled_combination_keeps_unit_sum_and_converges() {
        let (clean, noisy) = damped_epr(0.4);
        let gammas: BTreeMap<usize, f64> = [(0, 0.4), (1, 0.4)].into();
        let frame = MeasurementFrame::shared(&[0, 1], BasisType::Xtype);
        let ideal = born_probabilities(&clean, &frame, &[0, 1]).unwrap();
        let mut rng = substream(7, Domain::Pec, &[0]);
        let quasi =
            pec_quasi_sampled(&noisy, &gammas, &frame, &[0, 1], 200_000, &mut rng).unwrap();
        assert_abs_diff_eq!(quasi.sum(), 1.0, epsilon = 1e-6);
        let projected = quasi.project().unwrap();
        for (a, b) in projected.probs().iter().zip(ideal.probs()) {
            assert!((a - b).abs() < 0.02, "sampled {a} vs ideal {b}");
        }
    }

    #[test]
    fn allocation_is_exhaustive_and_respects_minimums() {
        let alloc = allocate_shots(&[0.9, -0.05, -0.05, 0.003], 100).unwrap();
        assert_eq!(alloc.iter().sum::<u64>(), 100);
        assert!(alloc.iter().all(|&a| a >= 1));
        assert!(allocate_shots(&[0.5, 0.5], 1).is_err());
    }

    #[test]
    fn zero_rate_collapses_to_plain_measurement() {
        let (_, noisy) = damped_epr(0.0);
        let gammas: BTreeMap<usize, f64> = [(0, 0.0), (1, 0.0)].into();
        let frame = MeasurementFrame::shared(&[0, 1], BasisType::Ztype);
        let (mitigated, quasi) =
            pec_mitigated_probabilities(&noisy, &gammas, &frame, &[0, 1], PecMode::Exact, None)
                .unwrap();
        assert_eq!(quasi.values().len(), 4);
        let direct = born_probabilities(&noisy, &frame, &[0, 1]).unwrap();
        for (a, b) in mitigated.probs().iter().zip(direct.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
