//! Virtual distillation with two state copies.
//!
//! Measuring a collision gate across each (qubit, copy-partner) pair turns
//! products of swap-type operators into diagonal observables. Ratios of the
//! resulting signed outcome averages estimate expectations under
//! `rho^2 / Tr(rho^2)`, which suppresses incoherent noise quadratically.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::{sample_counts, MeasurementFrame, OutcomeDistribution};
use crate::qem::simplex::project_to_simplex;
use crate::qstate::{CMat, DensityMatrix, C};

/// Collision gate diagonalizing the two-copy swap: outcome 01 flags the
/// antisymmetric pair state.
pub fn b_gate() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = C::new(1.0, 0.0);
    m[(1, 1)] = C::new(s, 0.0);
    m[(1, 2)] = C::new(-s, 0.0);
    m[(2, 1)] = C::new(s, 0.0);
    m[(2, 2)] = C::new(s, 0.0);
    m[(3, 3)] = C::new(1.0, 0.0);
    m
}

/// Phase-twisted collision gate diagonalizing Z-weighted swaps; equals the
/// collision gate times diag(1, 1, i, 1).
pub fn d_gate() -> CMat {
    let mut phase = CMat::identity(4, 4);
    phase[(2, 2)] = C::new(0.0, 1.0);
    b_gate() * phase
}

/// Outcome weights per (copy-1 bit, copy-2 bit) pair, indexed b1*2 + b2.
const SWAP_FACTOR: [f64; 4] = [1.0, -1.0, 1.0, 1.0];
const Z_SWAP_FACTOR: [f64; 4] = [1.0, 0.0, 0.0, -1.0];
const PHASE_FACTOR: [C; 4] = [
    C::new(1.0, 0.0),
    C::new(0.0, 1.0),
    C::new(0.0, -1.0),
    C::new(-1.0, 0.0),
];

/// How the two-copy outcome distributions are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdMode {
    Exact,
    /// Sampled collision-gate runs; the phase-twisted runs are only consumed
    /// for two-qubit subsets.
    Shots { b_shots: u64, d_shots: u64 },
}

/// Reduces to `subset` (in order), applies the frame rotations, and relabels
/// locally to 0..k.
fn rotated_local(
    rho: &DensityMatrix,
    frame: &MeasurementFrame,
    subset: &[usize],
) -> Result<DensityMatrix> {
    let reduced = rho.partial_trace(subset)?;
    let mut reduced = if reduced.qubits() == subset {
        reduced
    } else {
        reduced.permute_qubits(subset)?
    };
    for &q in subset {
        let qf = frame
            .get(q)
            .ok_or_else(|| Error::invalid(format!("frame has no setting for qubit {q}")))?;
        reduced.apply_unitary(&qf.rotation(), &[q])?;
    }
    let k = subset.len();
    DensityMatrix::new(reduced.matrix().clone(), (0..k).collect())
}

/// Two copies side by side: local qubits 0..k are the first copy, k..2k the
/// second.
fn two_copies(local: &DensityMatrix) -> Result<DensityMatrix> {
    let k = local.num_qubits();
    let second = DensityMatrix::new(local.matrix().clone(), (k..2 * k).collect())?;
    local.tensor(&second)
}

/// Applies `gate` across every (l, k+l) pair and returns the diagonal.
fn collided_diagonal(sigma: &DensityMatrix, gate: &CMat, k: usize) -> Result<Vec<f64>> {
    let mut s = sigma.clone();
    for l in 0..k {
        s.apply_unitary(gate, &[l, k + l])?;
    }
    Ok((0..s.dim()).map(|i| s.matrix()[(i, i)].re.max(0.0)).collect())
}

fn pair_index(outcome: usize, l: usize, k: usize) -> usize {
    let n = 2 * k;
    let b1 = (outcome >> (n - 1 - l)) & 1;
    let b2 = (outcome >> (n - 1 - (k + l))) & 1;
    b1 * 2 + b2
}

struct BStats {
    /// Mean of the full product weight; equals Tr(rho^2) of the subset.
    den: f64,
    /// Z-weighted numerators, one per subset qubit.
    num_z: Vec<f64>,
    /// Single-pair weights alone; equal the marginal purities Tr(rho_l^2).
    marginal_purity: Vec<f64>,
}

fn b_statistics(probs: &[f64], k: usize) -> BStats {
    let mut den = 0.0;
    let mut num_z = vec![0.0; k];
    let mut marginal = vec![0.0; k];
    for (o, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let pairs: Vec<usize> = (0..k).map(|l| pair_index(o, l, k)).collect();
        let full: f64 = pairs.iter().map(|&i| SWAP_FACTOR[i]).product();
        den += p * full;
        for l in 0..k {
            let mut w = Z_SWAP_FACTOR[pairs[l]];
            for (m, &pi) in pairs.iter().enumerate() {
                if m != l {
                    w *= SWAP_FACTOR[pi];
                }
            }
            num_z[l] += p * w;
            marginal[l] += p * SWAP_FACTOR[pairs[l]];
        }
    }
    BStats {
        den,
        num_z,
        marginal_purity: marginal,
    }
}

fn d_statistic(probs: &[f64], k: usize) -> f64 {
    let mut acc = C::new(0.0, 0.0);
    for (o, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut w = C::new(1.0, 0.0);
        for l in 0..k {
            w *= PHASE_FACTOR[pair_index(o, l, k)];
        }
        acc += w * C::new(p, 0.0);
    }
    acc.re
}

fn maybe_sampled(
    probs: Vec<f64>,
    k: usize,
    shots: Option<u64>,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<Vec<f64>> {
    match shots {
        None => Ok(probs),
        Some(n) => {
            let rng = rng
                .as_deref_mut()
                .ok_or_else(|| Error::invalid("shot mode requires a random number generator"))?;
            let dist = OutcomeDistribution::new(probs, (0..2 * k).collect())?;
            Ok(sample_counts(&dist, n, rng)?.probs().to_vec())
        }
    }
}

/// Distilled outcome distribution of measuring `subset` (one or two qubits)
/// of `rho` in `frame`, estimating the Born probabilities of
/// `rho^2 / Tr(rho^2)`.
pub fn vd_mitigated_probabilities(
    rho: &DensityMatrix,
    frame: &MeasurementFrame,
    subset: &[usize],
    mode: VdMode,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<OutcomeDistribution> {
    let k = subset.len();
    if !(1..=2).contains(&k) {
        return Err(Error::invalid(format!(
            "distillation supports one- or two-qubit subsets, got {k}"
        )));
    }
    let local = rotated_local(rho, frame, subset)?;
    let sigma = two_copies(&local)?;

    let (b_shots, d_shots) = match mode {
        VdMode::Exact => (None, None),
        VdMode::Shots { b_shots, d_shots } => (Some(b_shots), Some(d_shots)),
    };
    let pb = maybe_sampled(collided_diagonal(&sigma, &b_gate(), k)?, k, b_shots, &mut rng)?;
    let stats = b_statistics(&pb, k);
    if stats.den <= 0.0 {
        return Err(Error::numeric(format!(
            "distillation denominator {} is not positive",
            stats.den
        )));
    }
    let z: Vec<f64> = stats.num_z.iter().map(|n| n / stats.den).collect();

    let values = if k == 1 {
        vec![0.5 * (1.0 + z[0]), 0.5 * (1.0 - z[0])]
    } else {
        let pd = maybe_sampled(collided_diagonal(&sigma, &d_gate(), k)?, k, d_shots, &mut rng)?;
        let zz = d_statistic(&pd, k) / stats.den;
        let mut v = vec![0.0; 4];
        for m in 0..2 {
            for n in 0..2 {
                let sm = if m == 0 { 1.0 } else { -1.0 };
                let sn = if n == 0 { 1.0 } else { -1.0 };
                v[m * 2 + n] = 0.25 * (1.0 + sm * z[0] + sn * z[1] + sm * sn * zz);
            }
        }
        v
    };

    let values = match mode {
        VdMode::Exact => values,
        VdMode::Shots { .. } => project_to_simplex(&values),
    };
    OutcomeDistribution::new(values, subset.to_vec())
}

/// Order-2 Renyi entropies of a qubit pair and its marginals, estimated from
/// collision-gate statistics on two state copies.
#[derive(Debug, Clone, Copy)]
pub struct VdRenyi2 {
    pub pair: f64,
    pub left: f64,
    pub right: f64,
    /// True when the pair entropy sits below the left (right) marginal
    /// entropy by more than a roundoff guard, which no separable state
    /// allows.
    pub witnessed_left: bool,
    pub witnessed_right: bool,
}

/// Estimates pair and marginal purities of qubits `(left, right)` from one
/// set of collision-gate runs, and converts them to Renyi-2 entropies.
pub fn vd_renyi2_pair(
    rho: &DensityMatrix,
    pair: (usize, usize),
    mode: VdMode,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<VdRenyi2> {
    let subset = [pair.0, pair.1];
    let frame = MeasurementFrame::shared(&subset, crate::measure::BasisType::Ztype);
    let local = rotated_local(rho, &frame, &subset)?;
    let sigma = two_copies(&local)?;
    let b_shots = match mode {
        VdMode::Exact => None,
        VdMode::Shots { b_shots, .. } => Some(b_shots),
    };
    let pb = maybe_sampled(collided_diagonal(&sigma, &b_gate(), 2)?, 2, b_shots, &mut rng)?;
    let stats = b_statistics(&pb, 2);
    let entropy = |purity: f64| -> Result<f64> {
        if purity <= 0.0 {
            return Err(Error::numeric(format!("purity estimate {purity} not positive")));
        }
        Ok(-purity.log2())
    };
    let pair_s = entropy(stats.den)?;
    let left = entropy(stats.marginal_purity[0])?;
    let right = entropy(stats.marginal_purity[1])?;
    Ok(VdRenyi2 {
        pair: pair_s,
        left,
        right,
        witnessed_left: pair_s < left - crate::STATE_TOL,
        witnessed_right: pair_s < right - crate::STATE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{born_probabilities, BasisType};
    use crate::qstate::{make_source_state, NoiseSpec, SourceKind};
    use crate::rng::{substream, Domain};
    use approx::assert_abs_diff_eq;

    /// Born distribution of rho^2 / Tr(rho^2) over `subset`, the quantity the
    /// two-copy protocol estimates.
    fn squared_state_oracle(
        rho: &DensityMatrix,
        frame: &MeasurementFrame,
        subset: &[usize],
    ) -> OutcomeDistribution {
        let reduced = rho.partial_trace(subset).unwrap();
        let reduced = if reduced.qubits() == subset {
            reduced
        } else {
            reduced.permute_qubits(subset).unwrap()
        };
        let sq = reduced.matrix() * reduced.matrix();
        let tr: f64 = (0..sq.nrows()).map(|i| sq[(i, i)].re).sum();
        let normalized = DensityMatrix::new(sq / C::new(tr, 0.0), subset.to_vec()).unwrap();
        born_probabilities(&normalized, frame, subset).unwrap()
    }

    fn noisy_pair() -> DensityMatrix {
        let mut rho = make_source_state(
            SourceKind::GeneralizedEpr {
                angle: std::f64::consts::FRAC_PI_8,
            },
            &[2, 5],
        )
        .unwrap()
        .to_density();
        NoiseSpec::Depolarizing { gamma: 0.15 }
            .apply(&mut rho, &[2, 5])
            .unwrap();
        rho
    }

    #[test]
    fn phase_twisted_gate_matches_closed_form() {
        let d = d_gate();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!((d[(1, 1)] - C::new(s, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d[(1, 2)] - C::new(0.0, -s)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d[(2, 2)] - C::new(0.0, s)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d[(3, 3)] - C::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_distillation_matches_squared_state() {
        let rho = noisy_pair();
        let theta = [0.9, -0.4, 0.2];
        let frames = [
            MeasurementFrame::shared(&[2, 5], BasisType::Ztype),
            MeasurementFrame::shared(&[2, 5], BasisType::Xtype),
            MeasurementFrame::from_angles(&[(2, theta), (5, theta)], BasisType::Ztype),
        ];
        for frame in &frames {
            let got = vd_mitigated_probabilities(&rho, frame, &[2, 5], VdMode::Exact, None).unwrap();
            let want = squared_state_oracle(&rho, frame, &[2, 5]);
            for (a, b) in got.probs().iter().zip(want.probs()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_distillation_single_qubit() {
        let rho = noisy_pair();
        let frame = MeasurementFrame::from_angles(&[(5, [0.3, 1.0, 0.0])], BasisType::Ztype);
        let got = vd_mitigated_probabilities(&rho, &frame, &[5], VdMode::Exact, None).unwrap();
        let want = squared_state_oracle(&rho, &frame, &[5]);
        for (a, b) in got.probs().iter().zip(want.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_distillation_tracks_exact_and_is_deterministic() {
        let rho = noisy_pair();
        let frame = MeasurementFrame::shared(&[2, 5], BasisType::Xtype);
        let exact = vd_mitigated_probabilities(&rho, &frame, &[2, 5], VdMode::Exact, None).unwrap();
        let mode = VdMode::Shots {
            b_shots: 100_000,
            d_shots: 100_000,
        };
        let mut rng = substream(11, Domain::Vd, &[0]);
        let got = vd_mitigated_probabilities(&rho, &frame, &[2, 5], mode, Some(&mut rng)).unwrap();
        let mut rng2 = substream(11, Domain::Vd, &[0]);
        let again =
            vd_mitigated_probabilities(&rho, &frame, &[2, 5], mode, Some(&mut rng2)).unwrap();
        assert_eq!(got.probs(), again.probs());
        let sum: f64 = got.probs().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
        for (a, b) in got.probs().iter().zip(exact.probs()) {
            assert!((a - b).abs() < 0.02, "sampled {a} vs exact {b}");
        }
    }

    #[test]
    fn renyi2_matches_direct_purities() {
        let w = make_source_state(SourceKind::W3, &[0, 1, 2]).unwrap().to_density();
        let got = vd_renyi2_pair(&w, (0, 1), VdMode::Exact, None).unwrap();
        let pair_purity = w.partial_trace(&[0, 1]).unwrap().purity();
        let left_purity = w.partial_trace(&[0]).unwrap().purity();
        assert_abs_diff_eq!(got.pair, -pair_purity.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(got.left, -left_purity.log2(), epsilon = 1e-12);
        // pair and marginal purities coincide here, so no witness fires
        assert!(!got.witnessed_left);

        let epr = make_source_state(SourceKind::Epr, &[0, 1]).unwrap().to_density();
        let e = vd_renyi2_pair(&epr, (0, 1), VdMode::Exact, None).unwrap();
        assert_abs_diff_eq!(e.pair, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.left, 1.0, epsilon = 1e-12);
        assert!(e.witnessed_left && e.witnessed_right);
    }

    #[test]
    fn subset_size_is_restricted() {
        let w = make_source_state(SourceKind::W3, &[0, 1, 2]).unwrap().to_density();
        let frame = MeasurementFrame::shared(&[0, 1, 2], BasisType::Ztype);
        assert!(vd_mitigated_probabilities(&w, &frame, &[0, 1, 2], VdMode::Exact, None).is_err());
    }
}
