//! Topology inference: turning correlation matrices into source claims,
//! per-node-pair EPR counts, and small-source censuses.
//!
//! The qubitwise route bands the symmetrized pairwise uncertainties: below
//! one bit certifies a shared EPR-grade source, between one and the
//! uncorrelated ceiling certifies some shared multipartite source, and
//! anything at the ceiling is treated as unconnected. The nodewise route
//! solves the linear relations between uncertainty and characteristic
//! entries for integer source counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::total_key_capacity;
use crate::network::{NetworkTopology, Node, Source};
use crate::optimize::{CorrelationMatrix, MatrixKind};
use crate::qstate::{make_source_state, SourceKind};

/// Integer-closeness tolerance for noiseless matrices.
pub const EXACT_INTEGER_TOL: f64 = 1e-6;
/// Integer-closeness tolerance for sampled or mitigated matrices.
pub const NOISY_INTEGER_TOL: f64 = 0.05;

/// What the uncertainty bands certify about one inferred source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferredKind {
    Epr,
    Ghz,
    Unknown,
}

/// One inferred source: a qubit set and the strength of the claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceClaim {
    pub qubits: Vec<usize>,
    pub kind: InferredKind,
    /// Largest symmetrized uncertainty inside the group; absent for
    /// singletons.
    pub max_pair_uncertainty: Option<f64>,
}

/// Source counts between one ordered node pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSourceCounts {
    /// EPR sources shared by the two nodes.
    pub n_epr: u64,
    /// Larger sources shared by the two nodes.
    pub n_ghz: u64,
    /// Sources attached to the first node but not the second.
    pub n_i_rest: u64,
    /// Sources attached to the second node but not the first.
    pub n_j_rest: u64,
    /// Unrounded values in the same order, kept because the rounding rules
    /// are only trustworthy at moderate noise.
    pub raw: [f64; 4],
}

/// Network-wide census of two-, three- and four-qubit sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCensus {
    pub n_epr: u64,
    pub n_3ghz: u64,
    pub n_4ghz: u64,
}

/// Banding controls for the qubitwise protocol.
#[derive(Debug, Clone, Copy)]
pub struct InferenceOptions {
    /// Safety margin below the 2-bit uncorrelated ceiling.
    pub epsilon: f64,
    /// Merge the EPR and multipartite bands into one "connected" class.
    pub coarse_grained: bool,
    /// Replaces the `2 - epsilon` ceiling when the network may contain
    /// weakly entangled sources (see [`uncertainty_threshold_for_mixture`]).
    pub ceiling: Option<f64>,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self { epsilon: 0.05, coarse_grained: false, ceiling: None }
    }
}

/// Everything the inference protocol can say about a network.
#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub claims: Vec<SourceClaim>,
    /// Structural reconstruction for comparison against ground truth. Kind
    /// labels are nominal for non-EPR claims (multi-qubit groups carry a
    /// GHZ label of their size); structural equality ignores them.
    pub inferred: NetworkTopology,
    /// Distillable-key lower bounds, one per unordered qubit pair whose
    /// symmetrized uncertainty sits below one bit.
    pub distill_lb: Vec<((usize, usize), f64)>,
    pub total_key_lb: f64,
    /// Per node pair source counts; filled by the nodewise route.
    pub epr_counts: Vec<((String, String), PairSourceCounts)>,
    pub source_census: Option<SourceCensus>,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DistillDoc {
    pair: [usize; 2],
    bits: f64,
}

#[derive(Serialize, Deserialize)]
struct PairCountDoc {
    nodes: [String; 2],
    n_epr: u64,
    n_ghz: u64,
    n_i_rest: u64,
    n_j_rest: u64,
    raw_epr: f64,
}

#[derive(Serialize, Deserialize)]
struct LinkDoc {
    node: String,
    source: String,
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    total_key_lb: f64,
    warnings: Vec<String>,
    sources: Vec<SourceClaim>,
    links: Vec<LinkDoc>,
    distill_lb: Vec<DistillDoc>,
    epr_counts: Vec<PairCountDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_census: Option<SourceCensus>,
}

impl InferenceReport {
    /// Node-source adjacency: a node links to every inferred source it
    /// holds a qubit of.
    pub fn links(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for node in &self.inferred.nodes {
            for source in &self.inferred.sources {
                if source.qubits.iter().any(|q| node.qubits.contains(q)) {
                    out.push((node.id.clone(), source.id.clone()));
                }
            }
        }
        out
    }

    /// Serializes the report in the same format family as network configs,
    /// suitable for diffing against a ground-truth description.
    pub fn to_toml_string(&self) -> Result<String> {
        let doc = ReportDoc {
            total_key_lb: self.total_key_lb,
            warnings: self.warnings.clone(),
            sources: self.claims.clone(),
            links: self
                .links()
                .into_iter()
                .map(|(node, source)| LinkDoc { node, source })
                .collect(),
            distill_lb: self
                .distill_lb
                .iter()
                .map(|&((a, b), bits)| DistillDoc { pair: [a, b], bits })
                .collect(),
            epr_counts: self
                .epr_counts
                .iter()
                .map(|((a, b), c)| PairCountDoc {
                    nodes: [a.clone(), b.clone()],
                    n_epr: c.n_epr,
                    n_ghz: c.n_ghz,
                    n_i_rest: c.n_i_rest,
                    n_j_rest: c.n_j_rest,
                    raw_epr: c.raw[0],
                })
                .collect(),
            source_census: self.source_census,
        };
        toml::to_string(&doc).map_err(|e| Error::config(format!("report serialization: {e}")))
    }
}

fn qubit_labels(m: &CorrelationMatrix) -> Result<Vec<usize>> {
    m.labels
        .iter()
        .map(|l| {
            l.parse::<usize>()
                .map_err(|_| Error::invalid(format!("label {l} is not a qubit id")))
        })
        .collect()
}

fn symmetrized(m: &CorrelationMatrix) -> nalgebra::DMatrix<f64> {
    let n = m.n();
    nalgebra::DMatrix::from_fn(n, n, |i, j| m.value(i, j).min(m.value(j, i)))
}

/// Runs the banding protocol on a qubitwise uncertainty matrix and returns
/// the inferred topology with per-pair key bounds.
///
/// Conflicting claims (one qubit pulled into two groups, which only happens
/// under noise) resolve toward the group the qubit is least uncertain with;
/// every resolution leaves a warning. Qubits certifying with nobody become
/// singleton unknown claims.
pub fn infer_from_uqm(
    u: &CorrelationMatrix,
    node_assignment: &[(String, Vec<usize>)],
    opts: &InferenceOptions,
) -> Result<InferenceReport> {
    if u.kind != MatrixKind::QubitwiseUncertainty {
        return Err(Error::invalid(format!(
            "inference needs a qubitwise uncertainty matrix, got {:?}",
            u.kind
        )));
    }
    if !(0.0..1.0).contains(&opts.epsilon) {
        return Err(Error::invalid(format!(
            "epsilon {} outside [0, 1)",
            opts.epsilon
        )));
    }
    let qubits = qubit_labels(u)?;
    let n = qubits.len();
    let s = symmetrized(u);
    let ceiling = opts.ceiling.unwrap_or(2.0 - opts.epsilon);
    if !(1.0..=2.0).contains(&ceiling) {
        return Err(Error::invalid(format!(
            "uncorrelated ceiling {ceiling} outside [1, 2]"
        )));
    }

    let mut warnings = Vec::new();
    let mut claims: Vec<(Vec<usize>, InferredKind)> = Vec::new();
    if opts.coarse_grained {
        for i in 0..n {
            let mut set: Vec<usize> = (0..n).filter(|&j| j != i && s[(i, j)] < ceiling).collect();
            set.push(i);
            set.sort_unstable();
            claims.push((set, InferredKind::Unknown));
        }
    } else {
        for i in 0..n {
            for j in (i + 1)..n {
                if s[(i, j)] < 1.0 {
                    claims.push((vec![i, j], InferredKind::Epr));
                }
            }
        }
        for i in 0..n {
            let mut set: Vec<usize> = (0..n)
                .filter(|&j| j != i && (1.0..ceiling).contains(&s[(i, j)]))
                .collect();
            if set.is_empty() {
                continue;
            }
            set.push(i);
            set.sort_unstable();
            claims.push((set, InferredKind::Ghz));
        }
    }
    claims.sort();
    claims.dedup();

    // one qubit in two different groups: keep the affiliation with the
    // smallest uncertainty toward the rest of the group
    let affinity = |q: usize, set: &[usize]| -> f64 {
        set.iter()
            .filter(|&&j| j != q)
            .map(|&j| s[(q, j)])
            .fold(f64::INFINITY, f64::min)
    };
    let mut removals: Vec<(usize, usize)> = Vec::new();
    for (q, &label) in qubits.iter().enumerate() {
        let holders: Vec<usize> = claims
            .iter()
            .enumerate()
            .filter(|(_, (set, _))| set.contains(&q))
            .map(|(c, _)| c)
            .collect();
        if holders.len() < 2 {
            continue;
        }
        let winner = holders
            .iter()
            .copied()
            .min_by(|&a, &b| {
                affinity(q, &claims[a].0)
                    .partial_cmp(&affinity(q, &claims[b].0))
                    .expect("finite affinities")
            })
            .expect("nonempty holders");
        warnings.push(format!(
            "qubit {} claimed by {} sources; kept with its lowest-uncertainty group",
            label,
            holders.len()
        ));
        for c in holders {
            if c != winner {
                removals.push((c, q));
            }
        }
    }
    for (c, q) in removals {
        claims[c].0.retain(|&m| m != q);
    }
    claims.retain(|(set, _)| set.len() >= 2);
    claims.sort();
    claims.dedup();

    let mut assigned = vec![false; n];
    for (set, _) in &claims {
        for &q in set {
            assigned[q] = true;
        }
    }
    for (q, &done) in assigned.iter().enumerate() {
        if !done {
            claims.push((vec![q], InferredKind::Unknown));
        }
    }
    claims.sort();

    let final_claims: Vec<SourceClaim> = claims
        .iter()
        .map(|(set, kind)| {
            let max_u = if set.len() < 2 {
                None
            } else {
                let mut worst = f64::NEG_INFINITY;
                for (a, &i) in set.iter().enumerate() {
                    for &j in &set[a + 1..] {
                        worst = worst.max(s[(i, j)]);
                    }
                }
                Some(worst)
            };
            SourceClaim {
                qubits: set.iter().map(|&i| qubits[i]).collect(),
                kind: *kind,
                max_pair_uncertainty: max_u,
            }
        })
        .collect();

    let mut distill_lb = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if s[(i, j)] < 1.0 {
                distill_lb.push(((qubits[i], qubits[j]), 1.0 - s[(i, j)]));
            }
        }
    }
    let total_key_lb = total_key_capacity(&s)?;

    let sources: Vec<Source> = final_claims
        .iter()
        .enumerate()
        .map(|(idx, c)| Source {
            id: format!("s{idx}"),
            kind: match c.kind {
                InferredKind::Epr => SourceKind::Epr,
                _ => SourceKind::Ghz(c.qubits.len()),
            },
            qubits: c.qubits.clone(),
        })
        .collect();
    let nodes: Vec<Node> = node_assignment
        .iter()
        .map(|(id, qs)| Node { id: id.clone(), qubits: qs.clone() })
        .collect();
    if !nodes.is_empty() {
        let mut seen: Vec<usize> = Vec::new();
        for node in &nodes {
            for &q in &node.qubits {
                if !qubits.contains(&q) {
                    return Err(Error::config(format!(
                        "node {} references qubit {q} absent from the matrix",
                        node.id
                    )));
                }
                if seen.contains(&q) {
                    return Err(Error::config(format!("qubit {q} assigned to two nodes")));
                }
                seen.push(q);
            }
        }
        for &q in &qubits {
            if !seen.contains(&q) {
                return Err(Error::config(format!("qubit {q} not assigned to any node")));
            }
        }
    }
    let inferred = NetworkTopology { sources, nodes, ..Default::default() };

    Ok(InferenceReport {
        claims: final_claims,
        inferred,
        distill_lb,
        total_key_lb,
        epr_counts: Vec::new(),
        source_census: None,
        warnings,
    })
}

/// The tightest uncorrelated-pair uncertainty floor over the declared source
/// kinds: one bit plus the smallest single-qubit entropy any of those kinds
/// can hand a node. Grouping thresholds must stay below this value.
pub fn uncertainty_threshold_for_mixture(kinds: &[SourceKind]) -> Result<f64> {
    if kinds.is_empty() {
        return Err(Error::invalid("no source kinds declared".to_string()));
    }
    let mut min_entropy = f64::INFINITY;
    for &kind in kinds {
        let qubits: Vec<usize> = (0..kind.arity()).collect();
        let rho = make_source_state(kind, &qubits)?.to_density();
        for &q in &qubits {
            let reduced = rho.partial_trace(&[q])?;
            min_entropy = min_entropy.min(crate::info::von_neumann_entropy(&reduced)?);
        }
    }
    Ok(1.0 + min_entropy)
}

fn check_nodewise_pair(
    u: &CorrelationMatrix,
    m: &CorrelationMatrix,
    i: usize,
    j: usize,
) -> Result<()> {
    if u.kind != MatrixKind::NodewiseUncertainty || m.kind != MatrixKind::NodewiseCharacteristic {
        return Err(Error::invalid(format!(
            "source counting needs nodewise uncertainty and characteristic matrices, got {:?} and {:?}",
            u.kind, m.kind
        )));
    }
    if u.labels != m.labels {
        return Err(Error::dimension(
            "uncertainty and characteristic matrices cover different nodes".to_string(),
        ));
    }
    if i == j || i >= u.n() || j >= u.n() {
        return Err(Error::invalid(format!(
            "node pair ({i}, {j}) out of range for {} nodes",
            u.n()
        )));
    }
    Ok(())
}

fn raw_epr_between(u: &CorrelationMatrix, m: &CorrelationMatrix, i: usize, j: usize) -> f64 {
    u.value(i, i) - u.value(i, j) - m.value(i, j)
}

/// Counts the sources shared between nodes `i` and `j` (and each side's
/// remainder toward the rest of the network) from noiseless nodewise
/// matrices. Both symmetric readings of the EPR count must agree and all
/// four counts must land on nonnegative integers; anything else signals
/// assumption violations or excess noise.
pub fn count_epr_between_nodes(
    u: &CorrelationMatrix,
    m: &CorrelationMatrix,
    i: usize,
    j: usize,
) -> Result<PairSourceCounts> {
    check_nodewise_pair(u, m, i, j)?;
    let mij = m.value(i, j);
    let n_epr = raw_epr_between(u, m, i, j);
    let cross = raw_epr_between(u, m, j, i);
    if (n_epr - cross).abs() > 1e-6 {
        return Err(Error::assumption(format!(
            "EPR count disagrees between orientations: {n_epr} vs {cross}"
        )));
    }
    let n_ghz = 2.0 * mij + u.value(i, j) - u.value(i, i);
    let n_i_rest = u.value(i, i) / 2.0 - mij;
    let n_j_rest = u.value(j, j) / 2.0 - mij;
    let raw = [n_epr, n_ghz, n_i_rest, n_j_rest];
    let mut rounded = [0u64; 4];
    for (k, &x) in raw.iter().enumerate() {
        let r = x.round();
        if (x - r).abs() > EXACT_INTEGER_TOL || r < 0.0 {
            return Err(Error::assumption(format!(
                "source count {x} is not a nonnegative integer; matrices are noisy or assumptions fail"
            )));
        }
        rounded[k] = r as u64;
    }
    Ok(PairSourceCounts {
        n_epr: rounded[0],
        n_ghz: rounded[1],
        n_i_rest: rounded[2],
        n_j_rest: rounded[3],
        raw,
    })
}

/// Half the ordered-pair sum of raw EPR counts, rounded when within `tol`
/// of an integer (use [`EXACT_INTEGER_TOL`] or [`NOISY_INTEGER_TOL`]).
pub fn total_epr_count(
    u: &CorrelationMatrix,
    m: &CorrelationMatrix,
    tol: f64,
) -> Result<u64> {
    if u.n() < 2 {
        return Err(Error::invalid("need at least two nodes".to_string()));
    }
    check_nodewise_pair(u, m, 0, 1)?;
    let n = u.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += raw_epr_between(u, m, i, j);
            }
        }
    }
    total /= 2.0;
    let r = total.round();
    if (total - r).abs() > tol || r < 0.0 {
        return Err(Error::assumption(format!(
            "total EPR count {total} is not a nonnegative integer within {tol}"
        )));
    }
    Ok(r as u64)
}

/// Solves the source census for networks whose sources hold at most four
/// qubits: the characteristic diagonal counts every source qubit once, and
/// each shared source of `k` nodes contributes to `k(k-1)` ordered
/// off-diagonal entries.
pub fn census_3_4(m: &CorrelationMatrix, n_epr: u64, tol: f64) -> Result<SourceCensus> {
    if m.kind != MatrixKind::NodewiseCharacteristic {
        return Err(Error::invalid(format!(
            "census needs a nodewise characteristic matrix, got {:?}",
            m.kind
        )));
    }
    let n = m.n();
    let diag_sum: f64 = (0..n).map(|i| m.value(i, i)).sum();
    let offdiag_sum: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| m.value(i, j))
        .sum();
    let ne = n_epr as f64;
    let a = diag_sum - 2.0 * ne;
    let b = offdiag_sum - 2.0 * ne;
    let n4 = (b - 2.0 * a) / 4.0;
    let n3 = (a - 4.0 * n4) / 3.0;
    let mut rounded = [0u64; 2];
    for (k, &x) in [n3, n4].iter().enumerate() {
        let r = x.round();
        if (x - r).abs() > tol || r < 0.0 {
            return Err(Error::assumption(format!(
                "census has no nonnegative integer solution (n3 = {n3}, n4 = {n4})"
            )));
        }
        rounded[k] = r as u64;
    }
    Ok(SourceCensus { n_epr, n_3ghz: rounded[0], n_4ghz: rounded[1] })
}

/// Noise-hardened EPR count between nodes `i` and `j`: ceil the node
/// uncertainties and information, floor the conditional, after snapping
/// values within 1e-9 of an integer (so exact statistics reproduce the
/// noiseless rule). A negative result clamps to zero with a warning.
pub fn hardened_epr_count(
    u: &CorrelationMatrix,
    m: &CorrelationMatrix,
    i: usize,
    j: usize,
) -> Result<(u64, Vec<String>)> {
    check_nodewise_pair(u, m, i, j)?;
    let snap = |x: f64| -> f64 {
        let r = x.round();
        if (x - r).abs() <= 1e-9 {
            r
        } else {
            x
        }
    };
    let v = snap(u.value(i, i)).ceil() - snap(u.value(i, j)).floor() - snap(m.value(i, j)).ceil();
    if v < 0.0 {
        Ok((
            0,
            vec![format!(
                "hardened EPR count between nodes {i} and {j} was {v}; clamped to 0"
            )],
        ))
    } else {
        Ok((v as u64, Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::topology_equal;
    use crate::optimize::EntryProvenance;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn matrix(kind: MatrixKind, labels: &[&str], rows: &[&[f64]]) -> CorrelationMatrix {
        let n = labels.len();
        let values = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        CorrelationMatrix {
            kind,
            labels: labels.iter().map(|l| l.to_string()).collect(),
            values,
            provenance: vec![
                EntryProvenance {
                    frame: Vec::new(),
                    best_trial: 0,
                    trials_run: 0,
                    clamped: false,
                };
                n * n
            ],
        }
    }

    fn five_qubit_uqm() -> CorrelationMatrix {
        matrix(
            MatrixKind::QubitwiseUncertainty,
            &["1", "2", "3", "4", "5"],
            &[
                &[2.0, 1.0, 1.0, 2.0, 2.0],
                &[1.0, 2.0, 1.0, 2.0, 2.0],
                &[1.0, 1.0, 2.0, 2.0, 2.0],
                &[2.0, 2.0, 2.0, 2.0, 0.0],
                &[2.0, 2.0, 2.0, 0.0, 2.0],
            ],
        )
    }

    #[test]
    fn banding_recovers_ghz_and_epr_sources() {
        let nodes = vec![
            ("c1".to_string(), vec![1, 4]),
            ("c2".to_string(), vec![2, 5]),
            ("c3".to_string(), vec![3]),
        ];
        let report =
            infer_from_uqm(&five_qubit_uqm(), &nodes, &InferenceOptions::default()).unwrap();
        assert_eq!(report.claims.len(), 2);
        assert_eq!(report.claims[0].qubits, vec![1, 2, 3]);
        assert_eq!(report.claims[0].kind, InferredKind::Ghz);
        assert_eq!(report.claims[1].qubits, vec![4, 5]);
        assert_eq!(report.claims[1].kind, InferredKind::Epr);
        assert_eq!(report.distill_lb, vec![((4, 5), 1.0)]);
        assert_abs_diff_eq!(report.total_key_lb, 1.0, epsilon = 1e-12);
        assert!(report.warnings.is_empty());

        let truth = NetworkTopology {
            sources: vec![
                Source { id: "g".into(), kind: SourceKind::Ghz(3), qubits: vec![1, 2, 3] },
                Source { id: "e".into(), kind: SourceKind::Epr, qubits: vec![4, 5] },
            ],
            nodes: vec![
                Node { id: "c1".into(), qubits: vec![1, 4] },
                Node { id: "c2".into(), qubits: vec![2, 5] },
                Node { id: "c3".into(), qubits: vec![3] },
            ],
            ..Default::default()
        };
        assert!(topology_equal(&report.inferred, &truth));
        let links = report.links();
        assert_eq!(links.len(), 5);
        assert!(links.contains(&("c3".to_string(), "s0".to_string())));
        assert!(!links.contains(&("c3".to_string(), "s1".to_string())));
    }

    #[test]
    fn all_uncorrelated_matrix_yields_singletons() {
        let u = matrix(
            MatrixKind::QubitwiseUncertainty,
            &["0", "1", "2"],
            &[&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0]],
        );
        let report = infer_from_uqm(&u, &[], &InferenceOptions::default()).unwrap();
        assert_eq!(report.claims.len(), 3);
        for claim in &report.claims {
            assert_eq!(claim.kind, InferredKind::Unknown);
            assert_eq!(claim.qubits.len(), 1);
            assert_eq!(claim.max_pair_uncertainty, None);
        }
        assert!(report.links().is_empty());
        assert_abs_diff_eq!(report.total_key_lb, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_pair_below_one_bit_is_still_epr() {
        let u = matrix(
            MatrixKind::QubitwiseUncertainty,
            &["4", "5"],
            &[&[2.0, 0.9], &[0.9, 2.0]],
        );
        let report = infer_from_uqm(&u, &[], &InferenceOptions::default()).unwrap();
        assert_eq!(report.claims.len(), 1);
        assert_eq!(report.claims[0].kind, InferredKind::Epr);
        assert_abs_diff_eq!(report.distill_lb[0].1, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn conflicting_claims_resolve_to_lowest_uncertainty() {
        let u = matrix(
            MatrixKind::QubitwiseUncertainty,
            &["0", "1", "2"],
            &[&[2.0, 0.3, 0.5], &[0.3, 2.0, 2.0], &[0.5, 2.0, 2.0]],
        );
        let report = infer_from_uqm(&u, &[], &InferenceOptions::default()).unwrap();
        assert!(!report.warnings.is_empty());
        assert_eq!(report.claims.len(), 2);
        assert_eq!(report.claims[0].qubits, vec![0, 1]);
        assert_eq!(report.claims[0].kind, InferredKind::Epr);
        assert_eq!(report.claims[1].qubits, vec![2]);
        assert_eq!(report.claims[1].kind, InferredKind::Unknown);
        // the distillable bound for the dropped pair is still reported
        assert_eq!(report.distill_lb.len(), 2);
    }

    #[test]
    fn coarse_grained_mode_merges_bands() {
        let u = matrix(
            MatrixKind::QubitwiseUncertainty,
            &["0", "1", "2"],
            &[&[2.0, 1.3, 1.3], &[1.3, 2.0, 1.3], &[1.3, 1.3, 2.0]],
        );
        let opts = InferenceOptions {
            epsilon: 0.25,
            coarse_grained: true,
            ..Default::default()
        };
        let report = infer_from_uqm(&u, &[], &opts).unwrap();
        assert_eq!(report.claims.len(), 1);
        assert_eq!(report.claims[0].qubits, vec![0, 1, 2]);
        assert_eq!(report.claims[0].kind, InferredKind::Unknown);
        // at the default ceiling the same matrix reads as one GHZ-band group
        let fine = infer_from_uqm(&u, &[], &InferenceOptions::default()).unwrap();
        assert_eq!(fine.claims.len(), 1);
        assert_eq!(fine.claims[0].kind, InferredKind::Ghz);
    }

    #[test]
    fn mixture_thresholds_match_source_entropies() {
        assert_abs_diff_eq!(
            uncertainty_threshold_for_mixture(&[SourceKind::Ghz(3)]).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            uncertainty_threshold_for_mixture(&[SourceKind::Epr]).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let mixed = uncertainty_threshold_for_mixture(&[
            SourceKind::W3,
            SourceKind::GeneralizedEpr { angle: std::f64::consts::FRAC_PI_8 },
        ])
        .unwrap();
        assert_abs_diff_eq!(mixed, 1.0 + 0.600876036692856, epsilon = 1e-12);
        assert!(uncertainty_threshold_for_mixture(&[]).is_err());
    }

    fn triangle_matrices() -> (CorrelationMatrix, CorrelationMatrix) {
        let u = matrix(
            MatrixKind::NodewiseUncertainty,
            &["a", "b", "c"],
            &[&[4.0, 2.0, 2.0], &[2.0, 4.0, 2.0], &[2.0, 2.0, 4.0]],
        );
        let m = matrix(
            MatrixKind::NodewiseCharacteristic,
            &["a", "b", "c"],
            &[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]],
        );
        (u, m)
    }

    fn ghz_pair_matrices() -> (CorrelationMatrix, CorrelationMatrix) {
        let u = matrix(
            MatrixKind::NodewiseUncertainty,
            &["a", "b", "c"],
            &[&[4.0, 2.0, 2.0], &[2.0, 4.0, 2.0], &[2.0, 2.0, 4.0]],
        );
        let m = matrix(
            MatrixKind::NodewiseCharacteristic,
            &["a", "b", "c"],
            &[&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0]],
        );
        (u, m)
    }

    #[test]
    fn epr_triangle_counts() {
        let (u, m) = triangle_matrices();
        let c = count_epr_between_nodes(&u, &m, 0, 1).unwrap();
        assert_eq!((c.n_epr, c.n_ghz, c.n_i_rest, c.n_j_rest), (1, 0, 1, 1));
        assert_eq!(total_epr_count(&u, &m, EXACT_INTEGER_TOL).unwrap(), 3);
        let census = census_3_4(&m, 3, EXACT_INTEGER_TOL).unwrap();
        assert_eq!((census.n_3ghz, census.n_4ghz), (0, 0));
    }

    #[test]
    fn ghz_pair_counts() {
        let (u, m) = ghz_pair_matrices();
        let c = count_epr_between_nodes(&u, &m, 0, 1).unwrap();
        assert_eq!((c.n_epr, c.n_ghz, c.n_i_rest, c.n_j_rest), (0, 2, 0, 0));
        assert_eq!(total_epr_count(&u, &m, EXACT_INTEGER_TOL).unwrap(), 0);
        let census = census_3_4(&m, 0, EXACT_INTEGER_TOL).unwrap();
        assert_eq!((census.n_3ghz, census.n_4ghz), (2, 0));
    }

    #[test]
    fn mixed_partition_counts() {
        // three nodes holding {ghz qubit + epr half, ghz qubit + epr half,
        // ghz qubit}; the conditional toward the small node is directional
        let u = matrix(
            MatrixKind::NodewiseUncertainty,
            &["c1", "c2", "c3"],
            &[&[4.0, 1.0, 3.0], &[1.0, 4.0, 3.0], &[1.0, 1.0, 2.0]],
        );
        let m = matrix(
            MatrixKind::NodewiseCharacteristic,
            &["c1", "c2", "c3"],
            &[&[2.0, 2.0, 1.0], &[2.0, 2.0, 1.0], &[1.0, 1.0, 1.0]],
        );
        let c12 = count_epr_between_nodes(&u, &m, 0, 1).unwrap();
        assert_eq!((c12.n_epr, c12.n_ghz, c12.n_i_rest, c12.n_j_rest), (1, 1, 0, 0));
        let c13 = count_epr_between_nodes(&u, &m, 0, 2).unwrap();
        assert_eq!((c13.n_epr, c13.n_ghz, c13.n_i_rest, c13.n_j_rest), (0, 1, 1, 0));
        assert_eq!(total_epr_count(&u, &m, EXACT_INTEGER_TOL).unwrap(), 1);
        let census = census_3_4(&m, 1, EXACT_INTEGER_TOL).unwrap();
        assert_eq!((census.n_3ghz, census.n_4ghz), (1, 0));
    }

    #[test]
    fn inconsistent_matrices_are_rejected() {
        let (u, mut m) = triangle_matrices();
        m.values[(0, 1)] = 1.4;
        assert!(count_epr_between_nodes(&u, &m, 0, 1).is_err());
        let (mut u2, m2) = triangle_matrices();
        u2.values[(0, 0)] = 5.0;
        assert!(count_epr_between_nodes(&u2, &m2, 0, 1).is_err());
        assert!(census_3_4(&m2, 100, EXACT_INTEGER_TOL).is_err());
    }

    #[test]
    fn hardened_rule_survives_noise_and_snaps_exact_values() {
        let (u, m) = triangle_matrices();
        assert_eq!(hardened_epr_count(&u, &m, 0, 1).unwrap().0, 1);

        let noisy_u = matrix(
            MatrixKind::NodewiseUncertainty,
            &["a", "b"],
            &[&[3.9, 2.2], &[2.2, 3.9]],
        );
        let noisy_m = matrix(
            MatrixKind::NodewiseCharacteristic,
            &["a", "b"],
            &[&[1.9, 0.95], &[0.95, 1.9]],
        );
        assert_eq!(hardened_epr_count(&noisy_u, &noisy_m, 0, 1).unwrap().0, 1);

        // values a hair above an integer must snap before the ceiling
        let eps_u = matrix(
            MatrixKind::NodewiseUncertainty,
            &["a", "b"],
            &[&[4.0 + 5e-10, 2.0 - 5e-10], &[2.0 - 5e-10, 4.0 + 5e-10]],
        );
        let eps_m = matrix(
            MatrixKind::NodewiseCharacteristic,
            &["a", "b"],
            &[&[2.0, 1.0 + 5e-10], &[1.0 + 5e-10, 2.0]],
        );
        assert_eq!(hardened_epr_count(&eps_u, &eps_m, 0, 1).unwrap().0, 1);

        let clamp_u = matrix(
            MatrixKind::NodewiseUncertainty,
            &["a", "b"],
            &[&[2.0, 3.0], &[3.0, 2.0]],
        );
        let clamp_m = matrix(
            MatrixKind::NodewiseCharacteristic,
            &["a", "b"],
            &[&[1.0, 1.0], &[1.0, 1.0]],
        );
        let (c, w) = hardened_epr_count(&clamp_u, &clamp_m, 0, 1).unwrap();
        assert_eq!(c, 0);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn report_serializes_to_structured_document() {
        let nodes = vec![
            ("c1".to_string(), vec![1, 4]),
            ("c2".to_string(), vec![2, 5]),
            ("c3".to_string(), vec![3]),
        ];
        let mut report =
            infer_from_uqm(&five_qubit_uqm(), &nodes, &InferenceOptions::default()).unwrap();
        report.source_census = Some(SourceCensus { n_epr: 1, n_3ghz: 1, n_4ghz: 0 });
        let text = report.to_toml_string().unwrap();
        let parsed: toml::Table = text.parse().unwrap();
        assert_eq!(
            parsed["sources"][1]["kind"].as_str(),
            Some("epr"),
            "document: {text}"
        );
        assert_eq!(parsed["source_census"]["n_3ghz"].as_integer(), Some(1));
    }
}
