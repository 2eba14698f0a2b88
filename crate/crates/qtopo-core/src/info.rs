//! Entropic and covariance correlation quantities, all in bits (log base 2).

use crate::error::{Error, Result};
use crate::measure::OutcomeDistribution;
use crate::qstate::DensityMatrix;
use crate::LOG_CLAMP;

/// Shannon entropy of a probability vector. Entries in `[-1e-12, 0)` are
/// treated as zero; anything lower is an error.
pub fn shannon_entropy(probs: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for &p in probs {
        if p < -LOG_CLAMP {
            return Err(Error::numeric(format!("negative probability {p}")));
        }
        if p > LOG_CLAMP {
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// H(A | B) = H(AB) - H(B) from a joint distribution over `a ∪ b`.
pub fn conditional_entropy(
    joint: &OutcomeDistribution,
    a: &[usize],
    b: &[usize],
) -> Result<f64> {
    let hab = shannon_entropy(joint.marginal(&union(a, b))?.probs())?;
    let hb = shannon_entropy(joint.marginal(b)?.probs())?;
    Ok(hab - hb)
}

/// Measured mutual information I(A; B) = H(A) + H(B) - H(AB).
pub fn mutual_information(joint: &OutcomeDistribution, a: &[usize], b: &[usize]) -> Result<f64> {
    let ha = shannon_entropy(joint.marginal(a)?.probs())?;
    let hb = shannon_entropy(joint.marginal(b)?.probs())?;
    let hab = shannon_entropy(joint.marginal(&union(a, b))?.probs())?;
    Ok(ha + hb - hab)
}

/// Covariance of the +-1-encoded outcomes of two single qubits:
/// E(a_i a_j) - E(a_i) E(a_j). Lives in [-1, 1].
pub fn covariance(joint: &OutcomeDistribution, i: usize, j: usize) -> Result<f64> {
    let m = joint.marginal(&[i, j])?;
    let p = m.probs();
    let e_ij = p[0] - p[1] - p[2] + p[3];
    let e_i = p[0] + p[1] - p[2] - p[3];
    let e_j = p[0] - p[1] + p[2] - p[3];
    Ok(e_ij - e_i * e_j)
}

/// Variance of one qubit's +-1 outcome: 1 - E(a)^2.
pub fn variance(dist: &OutcomeDistribution, qubit: usize) -> Result<f64> {
    let e = dist.sign_expectation(qubit)?;
    Ok(1.0 - e * e)
}

/// Two-subsystem measured uncertainty
/// H(X_A | X_B) + H(Z_A | Z_B) from the X- and Z-basis joints.
pub fn pair_uncertainty(
    x_joint: &OutcomeDistribution,
    z_joint: &OutcomeDistribution,
    a: &[usize],
    b: &[usize],
) -> Result<f64> {
    Ok(conditional_entropy(x_joint, a, b)? + conditional_entropy(z_joint, a, b)?)
}

/// Unconditioned measured uncertainty H(X_A) + H(Z_A).
pub fn single_uncertainty(
    x_dist: &OutcomeDistribution,
    z_dist: &OutcomeDistribution,
    a: &[usize],
) -> Result<f64> {
    let hx = shannon_entropy(x_dist.marginal(a)?.probs())?;
    let hz = shannon_entropy(z_dist.marginal(a)?.probs())?;
    Ok(hx + hz)
}

/// Von Neumann entropy -Tr(rho log2 rho) via the eigenvalue spectrum.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    shannon_entropy(&rho.eigenvalues_clamped()?)
}

/// Renyi-2 entropy -log2 Tr(rho^2).
pub fn renyi2_entropy(rho: &DensityMatrix) -> Result<f64> {
    let purity = rho.purity();
    if purity <= 0.0 {
        return Err(Error::numeric(format!("non-positive purity {purity}")));
    }
    Ok(-purity.log2())
}

/// Entanglement bounds certified by a pairwise uncertainty value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementBounds {
    /// Lower bound on one-way distillable entanglement: 1 - H_u.
    pub distillable_lb: f64,
    /// Lower bound on the distillable secret key rate (same expression).
    pub key_lb: f64,
    /// True when H_u < 1, witnessing steerability of subsystem A by B.
    pub steering: bool,
}

/// Bounds from the uncertainty H_u(Q_A | Q_B); meaningful when positive.
pub fn entanglement_bounds(uncertainty: f64) -> EntanglementBounds {
    EntanglementBounds {
        distillable_lb: 1.0 - uncertainty,
        key_lb: 1.0 - uncertainty,
        steering: uncertainty < 1.0,
    }
}

/// Tripartite entanglement bound for three single qubits:
/// 1 - sum over qubits of [ H(X_i | X_j X_k) + H(Z_i | Z_j Z_k) ].
/// Equals 1 for a noiseless GHZ_3 and -5 for I/8.
pub fn tripartite_bound(
    x_joint: &OutcomeDistribution,
    z_joint: &OutcomeDistribution,
    qubits: [usize; 3],
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..3 {
        let a = [qubits[i]];
        let b: Vec<usize> = (0..3).filter(|&l| l != i).map(|l| qubits[l]).collect();
        total += conditional_entropy(x_joint, &a, &b)?;
        total += conditional_entropy(z_joint, &a, &b)?;
    }
    Ok(1.0 - total)
}

/// Total key capacity certified by a qubit-wise uncertainty matrix:
/// sum over unordered pairs of max(1 - min(U_ij, U_ji), 0).
pub fn total_key_capacity(u: &nalgebra::DMatrix<f64>) -> Result<f64> {
    if u.nrows() != u.ncols() {
        return Err(Error::dimension("uncertainty matrix must be square".to_string()));
    }
    let n = u.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += (1.0 - u[(i, j)].min(u[(j, i)])).max(0.0);
        }
    }
    Ok(total)
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = a.to_vec();
    out.extend_from_slice(b);
    out
}
