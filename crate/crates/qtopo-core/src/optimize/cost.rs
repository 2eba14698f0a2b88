//! Cost functions over measurement frames.
//!
//! A cost model owns the reduced state of the qubits it measures and turns a
//! flat parameter vector (three Euler angles per qubit) into the basis-round
//! outcome distributions, the scalar cost, and the per-outcome gradient
//! coefficients the chain rule needs. All costs are phrased so that lower is
//! better; quantities that are maximized in reports (mutual information,
//! covariance, variance) are negated internally.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::info::{mutual_information, pair_uncertainty, single_uncertainty};
use crate::measure::{
    born_probabilities, sample_counts, BasisType, MeasurementFrame, OutcomeDistribution,
    QubitFrame,
};
use crate::qem::{
    collect_snapshots, pec_mitigated_probabilities, sd_mitigated_probabilities,
    vd_mitigated_probabilities, PecMode, VdMode,
};
use crate::qstate::DensityMatrix;
use crate::rng::{substream, Domain};
use crate::LOG_CLAMP;

/// The frame-dependent quantity an entry optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// H(X_A | X_B) + H(Z_A | Z_B), minimized.
    PairUncertainty,
    /// H(X_A) + H(Z_A), minimized.
    SingleUncertainty,
    /// I(A; B) in one basis round, maximized.
    MutualInformation,
    /// Covariance of two +-1 outcomes, maximized.
    Covariance,
    /// Variance of one +-1 outcome, maximized.
    Variance,
}

impl CostKind {
    /// Whether the reported quantity is minimized (uncertainties) rather than
    /// maximized.
    pub fn minimizes(self) -> bool {
        matches!(self, CostKind::PairUncertainty | CostKind::SingleUncertainty)
    }

    /// Basis rounds needed per evaluation.
    pub fn rounds(self) -> &'static [BasisType] {
        match self {
            CostKind::PairUncertainty | CostKind::SingleUncertainty => {
                &[BasisType::Xtype, BasisType::Ztype]
            }
            _ => &[BasisType::Ztype],
        }
    }

    /// Gradient-descent step size that works well for this cost.
    pub fn default_step_size(self) -> f64 {
        match self {
            CostKind::PairUncertainty | CostKind::SingleUncertainty => 0.1,
            CostKind::MutualInformation => 0.25,
            CostKind::Covariance | CostKind::Variance => 0.3,
        }
    }

    /// Descent length that typically reaches the plateau.
    pub fn default_steps(self) -> usize {
        match self {
            CostKind::PairUncertainty | CostKind::SingleUncertainty => 30,
            CostKind::MutualInformation => 20,
            CostKind::Covariance | CostKind::Variance => 25,
        }
    }

    fn validate_groups(self, a: &[usize], b: &[usize]) -> Result<()> {
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{self:?} requires {what}")))
            }
        };
        match self {
            CostKind::PairUncertainty | CostKind::MutualInformation => {
                need(!a.is_empty() && !b.is_empty(), "two nonempty groups")
            }
            CostKind::SingleUncertainty => {
                need(!a.is_empty() && b.is_empty(), "one nonempty group")
            }
            CostKind::Covariance => need(a.len() == 1 && b.len() == 1, "two single qubits"),
            CostKind::Variance => need(a.len() == 1 && b.is_empty(), "one single qubit"),
        }
    }
}

/// Error-mitigation pipeline applied to every outcome distribution the cost
/// consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Mitigation {
    None,
    /// Probabilistic cancellation of per-qubit phase damping at the given
    /// rates.
    Pec { gammas: BTreeMap<usize, f64> },
    /// Two-copy virtual distillation; limited to one- and two-qubit entries.
    Vd,
    /// Shadow distillation from `snapshots` random-basis records per
    /// evaluation. Sampling-based by construction, and evaluated only at the
    /// shared frame (gradients are not defined for it here).
    Sd { snapshots: usize, pauli_route: bool },
}

impl Mitigation {
    /// Angle multiplicity: virtual distillation rotates both state copies, so
    /// every frame angle enters twice.
    pub fn frequency(&self) -> f64 {
        match self {
            Mitigation::Vd => 2.0,
            _ => 1.0,
        }
    }

    pub fn supports_optimization(&self) -> bool {
        !matches!(self, Mitigation::Sd { .. })
    }
}

/// How distributions are realized: exact Born values or seeded finite-shot
/// estimates. The tags are (row, column, trial, step, probe) and make every
/// evaluation its own reproducible stream.
#[derive(Debug, Clone, Copy)]
pub enum SamplingPlan {
    Exact,
    Sampled {
        shots: u64,
        master: u64,
        tags: [u64; 5],
    },
}

/// One cost evaluation: the internal (minimized) cost, the distributions it
/// was computed from, and whether any probability fell below the log clamp.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub distributions: Vec<OutcomeDistribution>,
    pub clamped: bool,
}

/// A frame-optimization target: one matrix entry's quantity on a reduced
/// state.
#[derive(Debug, Clone)]
pub struct CostModel {
    rho: DensityMatrix,
    group_a: Vec<usize>,
    group_b: Vec<usize>,
    kind: CostKind,
    mitigation: Mitigation,
}

impl CostModel {
    /// Reduces `rho` to the union of the two groups (first group's qubits
    /// leading) and validates the group shape for `kind`.
    pub fn new(
        rho: &DensityMatrix,
        kind: CostKind,
        group_a: &[usize],
        group_b: &[usize],
        mitigation: Mitigation,
    ) -> Result<Self> {
        kind.validate_groups(group_a, group_b)?;
        if group_a.iter().any(|q| group_b.contains(q)) {
            return Err(Error::invalid("groups share a qubit".to_string()));
        }
        let subset: Vec<usize> = group_a.iter().chain(group_b).copied().collect();
        if matches!(mitigation, Mitigation::Vd) && subset.len() > 2 {
            return Err(Error::invalid(
                "virtual distillation handles one- or two-qubit entries only".to_string(),
            ));
        }
        let reduced = rho.partial_trace(&subset)?;
        let reduced = if reduced.qubits() == subset.as_slice() {
            reduced
        } else {
            reduced.permute_qubits(&subset)?
        };
        Ok(Self {
            rho: reduced,
            group_a: group_a.to_vec(),
            group_b: group_b.to_vec(),
            kind,
            mitigation,
        })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn mitigation(&self) -> &Mitigation {
        &self.mitigation
    }

    /// Measured qubits, first group leading; parameter triples follow this
    /// order.
    pub fn qubits(&self) -> Vec<usize> {
        self.group_a.iter().chain(&self.group_b).copied().collect()
    }

    pub fn param_count(&self) -> usize {
        3 * (self.group_a.len() + self.group_b.len())
    }

    fn frame(&self, thetas: &[f64], basis: BasisType) -> MeasurementFrame {
        let settings = self
            .qubits()
            .into_iter()
            .enumerate()
            .map(|(i, q)| {
                (
                    q,
                    QubitFrame {
                        theta: [thetas[3 * i], thetas[3 * i + 1], thetas[3 * i + 2]],
                        basis,
                    },
                )
            })
            .collect();
        MeasurementFrame::new(settings)
    }

    fn round_rng(&self, domain: Domain, master: u64, tags: &[u64; 5], round: u64) -> ChaCha8Rng {
        let full = [tags[0], tags[1], tags[2], tags[3], tags[4], round];
        substream(master, domain, &full)
    }

    /// One outcome distribution per basis round, under the model's mitigation
    /// and the given sampling plan.
    pub fn distributions(
        &self,
        thetas: &[f64],
        plan: &SamplingPlan,
    ) -> Result<Vec<OutcomeDistribution>> {
        if thetas.len() != self.param_count() {
            return Err(Error::dimension(format!(
                "{} parameters for {} qubits",
                thetas.len(),
                self.param_count() / 3
            )));
        }
        let subset = self.qubits();

        // Shadow ensembles are shared across basis rounds: one collection per
        // evaluation, consumed by every round's estimator.
        let sd_snaps = if let Mitigation::Sd { snapshots, .. } = &self.mitigation {
            let SamplingPlan::Sampled { master, tags, .. } = plan else {
                return Err(Error::invalid(
                    "shadow distillation is sampling-based; use a sampled plan".to_string(),
                ));
            };
            let mut rng = self.round_rng(Domain::Shadow, *master, tags, 0);
            Some(collect_snapshots(&self.rho, *snapshots, &mut rng)?)
        } else {
            None
        };

        let mut out = Vec::with_capacity(self.kind.rounds().len());
        for (r, &basis) in self.kind.rounds().iter().enumerate() {
            let frame = self.frame(thetas, basis);
            let dist = match &self.mitigation {
                Mitigation::None => {
                    let exact = born_probabilities(&self.rho, &frame, &subset)?;
                    match plan {
                        SamplingPlan::Exact => exact,
                        SamplingPlan::Sampled { shots, master, tags } => {
                            let mut rng =
                                self.round_rng(Domain::CostSample, *master, tags, r as u64);
                            sample_counts(&exact, *shots, &mut rng)?
                        }
                    }
                }
                Mitigation::Pec { gammas } => match plan {
                    SamplingPlan::Exact => {
                        pec_mitigated_probabilities(
                            &self.rho,
                            gammas,
                            &frame,
                            &subset,
                            PecMode::Exact,
                            None,
                        )?
                        .0
                    }
                    SamplingPlan::Sampled { shots, master, tags } => {
                        let mut rng = self.round_rng(Domain::Pec, *master, tags, r as u64);
                        pec_mitigated_probabilities(
                            &self.rho,
                            gammas,
                            &frame,
                            &subset,
                            PecMode::Shots { total: *shots },
                            Some(&mut rng),
                        )?
                        .0
                    }
                },
                Mitigation::Vd => match plan {
                    SamplingPlan::Exact => {
                        vd_mitigated_probabilities(&self.rho, &frame, &subset, VdMode::Exact, None)?
                    }
                    SamplingPlan::Sampled { shots, master, tags } => {
                        let mut rng = self.round_rng(Domain::Vd, *master, tags, r as u64);
                        // collision and phase-twisted runs each get half the
                        // round budget
                        let mode = VdMode::Shots {
                            b_shots: shots.div_ceil(2),
                            d_shots: (shots / 2).max(1),
                        };
                        vd_mitigated_probabilities(&self.rho, &frame, &subset, mode, Some(&mut rng))?
                    }
                },
                Mitigation::Sd { pauli_route, .. } => {
                    let snaps = sd_snaps.as_ref().expect("collected above");
                    sd_mitigated_probabilities(snaps, &frame, &subset, *pauli_route)?
                }
            };
            out.push(dist);
        }
        Ok(out)
    }

    /// The reported (user-orientation) quantity from a set of round
    /// distributions.
    pub fn quantity(&self, dists: &[OutcomeDistribution]) -> Result<f64> {
        let a = &self.group_a;
        let b = &self.group_b;
        match self.kind {
            CostKind::PairUncertainty => pair_uncertainty(&dists[0], &dists[1], a, b),
            CostKind::SingleUncertainty => single_uncertainty(&dists[0], &dists[1], a),
            CostKind::MutualInformation => mutual_information(&dists[0], a, b),
            CostKind::Covariance => crate::info::covariance(&dists[0], a[0], b[0]),
            CostKind::Variance => crate::info::variance(&dists[0], a[0]),
        }
    }

    fn orient(&self, quantity: f64) -> f64 {
        if self.kind.minimizes() {
            quantity
        } else {
            -quantity
        }
    }

    /// Evaluates the internal cost at `thetas`. The clamp flag is set when a
    /// nonzero probability below the log clamp entered an entropy.
    pub fn evaluate(&self, thetas: &[f64], plan: &SamplingPlan) -> Result<Evaluation> {
        let dists = self.distributions(thetas, plan)?;
        let clamped = dists
            .iter()
            .flat_map(|d| d.probs())
            .any(|&p| p > 0.0 && p <= LOG_CLAMP);
        let cost = self.orient(self.quantity(&dists)?);
        Ok(Evaluation {
            cost,
            distributions: dists,
            clamped,
        })
    }

    /// Per-round, per-outcome partial derivatives of the internal cost with
    /// respect to the outcome probabilities, evaluated on `dists`. Constant
    /// offsets are dropped (they cancel against the probability-sum
    /// constraint). The flag reports whether the log clamp fired.
    pub fn gradient_coefficients(
        &self,
        dists: &[OutcomeDistribution],
    ) -> Result<(Vec<Vec<f64>>, bool)> {
        let mut clamped = false;
        let mut logp = |p: f64| -> f64 {
            if p < LOG_CLAMP {
                clamped = true;
            }
            p.max(LOG_CLAMP).log2()
        };
        let a = &self.group_a;
        let b = &self.group_b;
        let coeffs = match self.kind {
            CostKind::PairUncertainty => {
                // d/dp [H(AB) - H(B)] = -log2 p + log2 m_B
                let mut rounds = Vec::with_capacity(2);
                for d in dists {
                    let mb = d.marginal(b)?;
                    let c = d
                        .probs()
                        .iter()
                        .enumerate()
                        .map(|(o, &p)| {
                            let ob = project_outcome(d, o, b);
                            -logp(p) + logp(mb.probs()[ob])
                        })
                        .collect();
                    rounds.push(c);
                }
                rounds
            }
            CostKind::SingleUncertainty => dists
                .iter()
                .map(|d| d.probs().iter().map(|&p| -logp(p)).collect())
                .collect(),
            CostKind::MutualInformation => {
                // cost = -I; dI/dp = log2(p / (m_A m_B)) up to a constant
                let d = &dists[0];
                let ma = d.marginal(a)?;
                let mb = d.marginal(b)?;
                let c = d
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(o, &p)| {
                        let oa = project_outcome(d, o, a);
                        let ob = project_outcome(d, o, b);
                        -(logp(p) - logp(ma.probs()[oa]) - logp(mb.probs()[ob]))
                    })
                    .collect();
                vec![c]
            }
            CostKind::Covariance => {
                let d = &dists[0];
                let ea = d.sign_expectation(a[0])?;
                let eb = d.sign_expectation(b[0])?;
                let c = (0..d.len())
                    .map(|o| {
                        let sa = outcome_sign(d, o, a[0]);
                        let sb = outcome_sign(d, o, b[0]);
                        -(sa * sb - sa * eb - sb * ea)
                    })
                    .collect();
                vec![c]
            }
            CostKind::Variance => {
                let d = &dists[0];
                let e = d.sign_expectation(a[0])?;
                let c = (0..d.len()).map(|o| 2.0 * e * outcome_sign(d, o, a[0])).collect();
                vec![c]
            }
        };
        Ok((coeffs, clamped))
    }
}

/// Index of outcome `o` restricted to the qubits in `group` (big-endian in
/// group order).
fn project_outcome(dist: &OutcomeDistribution, o: usize, group: &[usize]) -> usize {
    let qubits = dist.qubits();
    let n = qubits.len();
    let mut out = 0usize;
    for (l, q) in group.iter().enumerate() {
        let pos = qubits.iter().position(|x| x == q).expect("group qubit in dist");
        out |= ((o >> (n - 1 - pos)) & 1) << (group.len() - 1 - l);
    }
    out
}

/// +-1 encoding of one qubit's bit in outcome `o` (outcome 0 -> +1).
fn outcome_sign(dist: &OutcomeDistribution, o: usize, qubit: usize) -> f64 {
    let qubits = dist.qubits();
    let n = qubits.len();
    let pos = qubits.iter().position(|x| *x == qubit).expect("qubit in dist");
    if (o >> (n - 1 - pos)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}
