//! Shadow distillation: classical snapshots of random single-qubit Pauli
//! measurements, combined pairwise to estimate expectations under
//! `rho^2 / Tr(rho^2)` without preparing two copies.
//!
//! A snapshot stores one basis/outcome byte pair per qubit; its inverse-
//! channel reconstruction is the product operator with per-qubit factors
//! `3 U^dag |b><b| U - I`. Sums over all ordered snapshot pairs are evaluated
//! in closed form from the ensemble sum `G = sum_a rho_hat_a`, so the
//! estimator costs O(n) in the number of snapshots.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::MeasurementFrame;
use crate::qem::simplex::project_to_simplex;
use crate::qstate::{hadamard, identity2, CMat, DensityMatrix, C};

/// Largest subsystem snapshots are collected on; the rotated-basis table has
/// 3^k entries.
pub const MAX_SNAPSHOT_QUBITS: usize = 6;

/// One random-basis measurement record: a basis tag (0 = Z, 1 = X, 2 = Y) and
/// an outcome bit per qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowSnapshot {
    qubits: Vec<usize>,
    bases: Vec<u8>,
    outcomes: Vec<u8>,
}

impl ShadowSnapshot {
    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn bases(&self) -> &[u8] {
        &self.bases
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }
}

/// Rotation mapping the measured basis onto the computational one.
fn basis_rotation(basis: u8) -> CMat {
    match basis {
        0 => identity2(),
        1 => hadamard(),
        _ => {
            // Y basis: diag(1, -i) sends |+i> / |-i> onto |+> / |->.
            let mut s = CMat::identity(2, 2);
            s[(1, 1)] = C::new(0.0, -1.0);
            hadamard() * s
        }
    }
}

/// Single-qubit inverse-channel factor `3 U^dag |b><b| U - I`.
fn snapshot_factor(basis: u8, outcome: u8) -> CMat {
    let u = basis_rotation(basis);
    let mut proj = CMat::zeros(2, 2);
    proj[(outcome as usize, outcome as usize)] = C::new(1.0, 0.0);
    u.adjoint() * proj * u * C::new(3.0, 0.0) - identity2()
}

/// Draws `count` snapshots of `rho`. The rotated-basis outcome distributions
/// are precomputed once per call, so the per-snapshot cost is a handful of
/// random draws.
pub fn collect_snapshots(
    rho: &DensityMatrix,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ShadowSnapshot>> {
    let k = rho.num_qubits();
    if k > MAX_SNAPSHOT_QUBITS {
        return Err(Error::invalid(format!(
            "snapshot collection supports up to {MAX_SNAPSHOT_QUBITS} qubits, got {k}; \
             reduce the state to the relevant subsystem first"
        )));
    }
    let combos = 3usize.pow(k as u32);
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(combos);
    for combo in 0..combos {
        let mut rotated = rho.clone();
        for l in 0..k {
            let digit = (combo / 3usize.pow((k - 1 - l) as u32)) % 3;
            rotated.apply_unitary(&basis_rotation(digit as u8), &[rho.qubits()[l]])?;
        }
        tables.push(
            (0..rotated.dim())
                .map(|i| rotated.matrix()[(i, i)].re.max(0.0))
                .collect(),
        );
    }

    let mut snaps = Vec::with_capacity(count);
    for _ in 0..count {
        let mut bases = Vec::with_capacity(k);
        let mut combo = 0usize;
        for _ in 0..k {
            let b: u8 = rng.random_range(0..3);
            bases.push(b);
            combo = combo * 3 + b as usize;
        }
        let table = &tables[combo];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = table.len() - 1;
        for (i, &p) in table.iter().enumerate() {
            acc += p;
            if u < acc {
                idx = i;
                break;
            }
        }
        let outcomes: Vec<u8> = (0..k).map(|l| ((idx >> (k - 1 - l)) & 1) as u8).collect();
        snaps.push(ShadowSnapshot {
            qubits: rho.qubits().to_vec(),
            bases,
            outcomes,
        });
    }
    Ok(snaps)
}

fn subset_positions(snap: &ShadowSnapshot, subset: &[usize]) -> Result<Vec<usize>> {
    subset
        .iter()
        .map(|q| {
            snap.qubits
                .iter()
                .position(|x| x == q)
                .ok_or_else(|| Error::invalid(format!("qubit {q} not covered by the snapshots")))
        })
        .collect()
}

/// The pair-moment matrix `M = G^2 - sum_a rho_hat_a^2` restricted to the
/// given positions, with an optional rotation per qubit applied to every
/// factor. `Tr(O M)` equals the sum of `Tr(O rho_hat_a rho_hat_b)` over all
/// ordered pairs `a != b`.
fn pair_moment_matrix(
    snaps: &[ShadowSnapshot],
    positions: &[usize],
    rotations: &[CMat],
) -> Result<CMat> {
    let m = positions.len();
    let dim = 1usize << m;
    let mut g = CMat::zeros(dim, dim);
    let mut sum_sq = CMat::zeros(dim, dim);
    let reference = &snaps[0].qubits;
    for snap in snaps {
        if &snap.qubits != reference {
            return Err(Error::invalid(
                "snapshots cover different qubit sets".to_string(),
            ));
        }
        let mut op = CMat::identity(1, 1);
        let mut op_sq = CMat::identity(1, 1);
        for (l, &pos) in positions.iter().enumerate() {
            let f = snapshot_factor(snap.bases[pos], snap.outcomes[pos]);
            let rotated = &rotations[l] * f * rotations[l].adjoint();
            op = op.kronecker(&rotated);
            op_sq = op_sq.kronecker(&(&rotated * &rotated));
        }
        g += op;
        sum_sq += op_sq;
    }
    Ok(&g * &g - sum_sq)
}

/// Ratio estimate of `Tr(O rho^2) / Tr(rho^2)` on `subset`, the expectation
/// of observable `O` under the distilled state. Needs at least two snapshots.
pub fn sd_expectation(
    snaps: &[ShadowSnapshot],
    observable: &CMat,
    subset: &[usize],
) -> Result<f64> {
    if snaps.len() < 2 {
        return Err(Error::invalid(
            "pairwise estimation needs at least two snapshots".to_string(),
        ));
    }
    let positions = subset_positions(&snaps[0], subset)?;
    let dim = 1usize << subset.len();
    if observable.nrows() != dim || observable.ncols() != dim {
        return Err(Error::dimension(format!(
            "observable is {}x{}, expected {dim}x{dim}",
            observable.nrows(),
            observable.ncols()
        )));
    }
    let identities: Vec<CMat> = (0..subset.len()).map(|_| identity2()).collect();
    let moment = pair_moment_matrix(snaps, &positions, &identities)?;
    let den: f64 = (0..dim).map(|i| moment[(i, i)].re).sum();
    if den <= 0.0 {
        return Err(Error::numeric(format!(
            "distillation denominator {den} is not positive"
        )));
    }
    let num: f64 = (observable * &moment).diagonal().iter().map(|c| c.re).sum();
    Ok(num / den)
}

/// Distilled outcome distribution of measuring `subset` in `frame`, estimated
/// from the snapshot ensemble.
///
/// The default route evaluates the distilled weight of each outcome projector
/// directly; the numerators sum to the denominator exactly, so the result is
/// normalized by construction and only finite-sample noise can push single
/// entries below zero (fixed by a simplex projection). The Pauli route
/// reconstructs the same distribution from Z-string expectations first.
pub fn sd_mitigated_probabilities(
    snaps: &[ShadowSnapshot],
    frame: &MeasurementFrame,
    subset: &[usize],
    pauli_route: bool,
) -> Result<crate::measure::OutcomeDistribution> {
    if snaps.len() < 2 {
        return Err(Error::invalid(
            "pairwise estimation needs at least two snapshots".to_string(),
        ));
    }
    let positions = subset_positions(&snaps[0], subset)?;
    let m = subset.len();
    let dim = 1usize << m;
    let rotations: Vec<CMat> = subset
        .iter()
        .map(|&q| {
            frame
                .get(q)
                .map(|qf| qf.rotation())
                .ok_or_else(|| Error::invalid(format!("frame has no setting for qubit {q}")))
        })
        .collect::<Result<_>>()?;
    let moment = pair_moment_matrix(snaps, &positions, &rotations)?;
    let num: Vec<f64> = (0..dim).map(|s| moment[(s, s)].re).collect();
    let den: f64 = num.iter().sum();
    if den <= 0.0 {
        return Err(Error::numeric(format!(
            "distillation denominator {den} is not positive"
        )));
    }

    let probs: Vec<f64> = if pauli_route {
        // Z-string expectations e_T, then the inverse transform back to
        // outcome weights.
        let signs = |t: usize, s: usize| -> f64 {
            if (t & s).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        };
        let e: Vec<f64> = (0..dim)
            .map(|t| (0..dim).map(|s| signs(t, s) * num[s] / den).sum())
            .collect();
        (0..dim)
            .map(|s| (0..dim).map(|t| signs(t, s) * e[t]).sum::<f64>() / dim as f64)
            .collect()
    } else {
        num.iter().map(|n| n / den).collect()
    };

    let probs = if probs.iter().any(|&p| p < 0.0) {
        project_to_simplex(&probs)
    } else {
        probs
    };
    crate::measure::OutcomeDistribution::new(probs, subset.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{born_probabilities, BasisType, OutcomeDistribution};
    use crate::qstate::{make_source_state, pauli_z, NoiseSpec, SourceKind};
    use crate::rng::{substream, Domain};
    use approx::assert_abs_diff_eq;

    #[test]
    fn factor_average_reconstructs_the_state() {
        // one-qubit check of the inverse-channel convention: averaging
        // p(b,o) * factor(b,o) over bases and outcomes returns rho
        let mut rho = make_source_state(SourceKind::Epr, &[0, 1])
            .unwrap()
            .to_density()
            .partial_trace(&[0])
            .unwrap();
        rho.apply_unitary(&crate::qstate::ry(0.7), &[0]).unwrap();
        NoiseSpec::PhaseDamping { gamma: 0.2 }
            .apply(&mut rho, &[0])
            .unwrap();

        let mut recon = CMat::zeros(2, 2);
        for basis in 0..3u8 {
            let u = basis_rotation(basis);
            let mut rotated = rho.clone();
            rotated.apply_unitary(&u, &[0]).unwrap();
            for outcome in 0..2u8 {
                let p = rotated.matrix()[(outcome as usize, outcome as usize)].re;
                recon += snapshot_factor(basis, outcome) * C::new(p / 3.0, 0.0);
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(
                    (recon[(r, c)] - rho.matrix()[(r, c)]).norm(),
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn collection_is_deterministic_per_stream() {
        let rho = make_source_state(SourceKind::W3, &[0, 1, 2]).unwrap().to_density();
        let mut a = substream(9, Domain::Shadow, &[1]);
        let mut b = substream(9, Domain::Shadow, &[1]);
        let s1 = collect_snapshots(&rho, 50, &mut a).unwrap();
        let s2 = collect_snapshots(&rho, 50, &mut b).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn pure_state_pauli_expectation() {
        let rho = make_source_state(SourceKind::Epr, &[0, 1]).unwrap().to_density();
        let mut rng = substream(3, Domain::Shadow, &[0]);
        let snaps = collect_snapshots(&rho, 50_000, &mut rng).unwrap();
        let zz = pauli_z().kronecker(&pauli_z());
        let got = sd_expectation(&snaps, &zz, &[0, 1]).unwrap();
        assert!((got - 1.0).abs() < 0.1, "ZZ estimate {got}");
        let zi = pauli_z().kronecker(&identity2());
        let single = sd_expectation(&snaps, &zi, &[0, 1]).unwrap();
        assert!(single.abs() < 0.1, "Z1 estimate {single}");
    }

    #[test]
    fn mitigated_distribution_tracks_squared_state() {
        let mut rho = make_source_state(SourceKind::Epr, &[0, 1]).unwrap().to_density();
        NoiseSpec::Depolarizing { gamma: 0.2 }
            .apply(&mut rho, &[0, 1])
            .unwrap();
        let sq = rho.matrix() * rho.matrix();
        let tr: f64 = (0..4).map(|i| sq[(i, i)].re).sum();
        let distilled = DensityMatrix::new(sq / C::new(tr, 0.0), vec![0, 1]).unwrap();

        let mut rng = substream(5, Domain::Shadow, &[7]);
        let snaps = collect_snapshots(&rho, 50_000, &mut rng).unwrap();
        for basis in [BasisType::Ztype, BasisType::Xtype] {
            let frame = MeasurementFrame::shared(&[0, 1], basis);
            let want = born_probabilities(&distilled, &frame, &[0, 1]).unwrap();
            let got = sd_mitigated_probabilities(&snaps, &frame, &[0, 1], false).unwrap();
            let sum: f64 = got.probs().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
            for (a, b) in got.probs().iter().zip(want.probs()) {
                assert!((a - b).abs() < 0.05, "estimate {a} vs oracle {b}");
            }
        }
    }

    #[test]
    fn projector_and_pauli_routes_agree() {
        let rho = make_source_state(SourceKind::W3, &[0, 1, 2]).unwrap().to_density();
        let mut rng = substream(8, Domain::Shadow, &[2]);
        let snaps = collect_snapshots(&rho, 5_000, &mut rng).unwrap();
        let frame = MeasurementFrame::shared(&[0, 1], BasisType::Ztype);
        let a = sd_mitigated_probabilities(&snaps, &frame, &[0, 1], false).unwrap();
        let b = sd_mitigated_probabilities(&snaps, &frame, &[0, 1], true).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn subsystem_restriction_estimates_reduced_state() {
        let rho = make_source_state(SourceKind::W3, &[0, 1, 2]).unwrap().to_density();
        let reduced = rho.partial_trace(&[1, 2]).unwrap();
        let sq = reduced.matrix() * reduced.matrix();
        let tr: f64 = (0..4).map(|i| sq[(i, i)].re).sum();
        let distilled = DensityMatrix::new(sq / C::new(tr, 0.0), vec![1, 2]).unwrap();
        let frame = MeasurementFrame::shared(&[1, 2], BasisType::Ztype);
        let want = born_probabilities(&distilled, &frame, &[1, 2]).unwrap();

        let mut rng = substream(21, Domain::Shadow, &[4]);
        let snaps = collect_snapshots(&rho, 50_000, &mut rng).unwrap();
        let got = sd_mitigated_probabilities(&snaps, &frame, &[1, 2], false).unwrap();
        for (a, b) in got.probs().iter().zip(want.probs()) {
            assert!((a - b).abs() < 0.05, "estimate {a} vs oracle {b}");
        }
    }

    #[test]
    fn too_few_snapshots_is_an_error() {
        let rho = make_source_state(SourceKind::Epr, &[0, 1]).unwrap().to_density();
        let mut rng = substream(1, Domain::Shadow, &[0]);
        let snaps = collect_snapshots(&rho, 1, &mut rng).unwrap();
        let frame = MeasurementFrame::shared(&[0, 1], BasisType::Ztype);
        assert!(sd_mitigated_probabilities(&snaps, &frame, &[0, 1], false).is_err());
        let _ = OutcomeDistribution::new(vec![1.0, 0.0], vec![9]).unwrap();
    }
}
