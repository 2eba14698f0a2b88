//! Projective two-basis measurements and outcome statistics.
//!
//! Each qubit carries a frame angle triple `theta` fixing a local unitary
//! U(theta); the Z-type observable projects onto `U^dag |x><x| U` (the
//! computational basis at zero angles) and the X-type observable onto
//! `U^dag H |z><z| H U` (the Hadamard basis at zero angles). The two bases
//! are mutually unbiased for every theta.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::qstate::{hadamard, measurement_unitary, CMat, DensityMatrix};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisType {
    Ztype,
    Xtype,
}

/// One qubit's measurement setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitFrame {
    pub theta: [f64; 3],
    pub basis: BasisType,
}

impl QubitFrame {
    /// The rotation V with outcome probability `<x| V rho V^dag |x>`.
    pub fn rotation(&self) -> CMat {
        let u = measurement_unitary(self.theta);
        match self.basis {
            BasisType::Ztype => u,
            BasisType::Xtype => hadamard() * u,
        }
    }
}

/// Per-qubit measurement settings for (part of) a state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    settings: BTreeMap<usize, QubitFrame>,
}

impl MeasurementFrame {
    pub fn new(settings: BTreeMap<usize, QubitFrame>) -> Self {
        Self { settings }
    }

    /// Zero-angle frame (the shared reference frame) in one basis.
    pub fn shared(qubits: &[usize], basis: BasisType) -> Self {
        let settings = qubits
            .iter()
            .map(|&q| (q, QubitFrame { theta: [0.0; 3], basis }))
            .collect();
        Self { settings }
    }

    /// Same angles on every qubit listed, one basis for all.
    pub fn from_angles(angles: &[(usize, [f64; 3])], basis: BasisType) -> Self {
        let settings = angles
            .iter()
            .map(|&(q, theta)| (q, QubitFrame { theta, basis }))
            .collect();
        Self { settings }
    }

    pub fn get(&self, qubit: usize) -> Option<&QubitFrame> {
        self.settings.get(&qubit)
    }

    pub fn settings(&self) -> &BTreeMap<usize, QubitFrame> {
        &self.settings
    }
}

/// A probability (or empirical frequency) vector over the outcomes of an
/// ordered qubit subset; outcome bitstrings are big-endian in `qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
    qubits: Vec<usize>,
}

impl OutcomeDistribution {
    pub fn new(probs: Vec<f64>, qubits: Vec<usize>) -> Result<Self> {
        if probs.len() != 1usize << qubits.len() {
            return Err(Error::dimension(format!(
                "{} probabilities for {} qubits",
                probs.len(),
                qubits.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::numeric(format!("probabilities sum to {sum}")));
        }
        if probs.iter().any(|&p| p < -1e-9) {
            return Err(Error::numeric("negative probability".to_string()));
        }
        Ok(Self { probs, qubits })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Marginal over `keep` (a subset of this distribution's qubits), in the
    /// order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<OutcomeDistribution> {
        let n = self.qubits.len();
        let pos: Vec<usize> = keep
            .iter()
            .map(|q| {
                self.qubits
                    .iter()
                    .position(|x| x == q)
                    .ok_or_else(|| Error::dimension(format!("qubit {q} not in distribution")))
            })
            .collect::<Result<_>>()?;
        let k = keep.len();
        let mut out = vec![0.0; 1 << k];
        for (idx, &p) in self.probs.iter().enumerate() {
            let mut o = 0usize;
            for (l, &pp) in pos.iter().enumerate() {
                o |= ((idx >> (n - 1 - pp)) & 1) << (k - 1 - l);
            }
            out[o] += p;
        }
        OutcomeDistribution::new(out, keep.to_vec())
    }

    /// The +-1 expectation of one qubit's outcome (outcome 0 -> +1).
    pub fn sign_expectation(&self, qubit: usize) -> Result<f64> {
        let m = self.marginal(&[qubit])?;
        Ok(m.probs[0] - m.probs[1])
    }
}

/// Exact Born probabilities of measuring `subset` of `rho` in `frame`.
/// Qubits outside `subset` are traced out first; outcome bit order follows
/// `subset`.
pub fn born_probabilities(
    rho: &DensityMatrix,
    frame: &MeasurementFrame,
    subset: &[usize],
) -> Result<OutcomeDistribution> {
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
    let probs: Vec<f64> = (0..reduced.dim())
        .map(|i| reduced.matrix()[(i, i)].re.max(0.0))
        .collect();
    OutcomeDistribution::new(probs, subset.to_vec())
}

/// Samples `shots` outcomes and returns the empirical distribution.
///
/// Sampling goes through a binomial chain (exact multinomial), so cost scales
/// with the number of outcomes, not with `shots`.
pub fn sample_counts(
    dist: &OutcomeDistribution,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> Result<OutcomeDistribution> {
    if shots == 0 {
        return Err(Error::invalid("zero shots".to_string()));
    }
    let counts = multinomial_counts(dist.probs(), shots, rng);
    let freqs = counts.iter().map(|&c| c as f64 / shots as f64).collect();
    OutcomeDistribution::new(freqs, dist.qubits().to_vec())
}

/// Convenience wrapper deriving the generator from `(master seed, tags)`.
pub fn sample_counts_seeded(
    dist: &OutcomeDistribution,
    shots: u64,
    master: u64,
    tags: &[u64],
) -> Result<OutcomeDistribution> {
    let mut rng = substream(master, Domain::CostSample, tags);
    sample_counts(dist, shots, &mut rng)
}

/// Multinomial sample via a chain of binomials.
pub fn multinomial_counts(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_shots = shots;
    let mut remaining_mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probs.len() {
            counts[i] = remaining_shots;
            break;
        }
        let q = if remaining_mass <= 0.0 {
            0.0
        } else {
            (p / remaining_mass).clamp(0.0, 1.0)
        };
        let draw = if q >= 1.0 {
            remaining_shots
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining_shots, q)
                .expect("binomial parameters validated")
                .sample(rng)
        };
        counts[i] = draw;
        remaining_shots -= draw;
        remaining_mass -= p;
    }
    counts
}

/// Draws a single outcome index from the distribution.
pub fn sample_one(dist: &OutcomeDistribution, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.probs().iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}
