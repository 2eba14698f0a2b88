//! Network topology: sources, nodes, per-qubit noise, misalignment, and the
//! global state assembly.

mod config;

pub use config::NetworkConfig;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qstate::{
    make_source_state, measurement_unitary, DensityMatrix, NoiseSpec, SourceKind, MAX_QUBITS,
};

/// One entanglement source and the qubit ids it emits.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub id: String,
    pub kind: SourceKind,
    pub qubits: Vec<usize>,
}

/// One network node and the qubit ids it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub qubits: Vec<usize>,
}

/// A full network description. `noise` maps qubit ids to local channels,
/// `source_noise` mixes white noise into a source's joint state right after
/// emission, and `misalignment` rotates a qubit's arriving state by
/// U(theta)^dag (an optimizer measuring at exactly `theta` sees aligned
/// statistics).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkTopology {
    pub sources: Vec<Source>,
    pub nodes: Vec<Node>,
    pub noise: BTreeMap<usize, NoiseSpec>,
    pub source_noise: BTreeMap<String, f64>,
    pub misalignment: BTreeMap<usize, [f64; 3]>,
}

/// Which structural assumptions a pipeline relies on.
///
/// * `no_overlap` (A): every qubit belongs to exactly one source.
/// * `node_spread` (B): a node holds at most one qubit of any source.
/// * `shared_frame` (C): zero-angle frames are trusted, so matrix builders
///   may skip variational alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionProfile {
    pub no_overlap: bool,
    pub node_spread: bool,
    pub shared_frame: bool,
}

impl Default for AssumptionProfile {
    fn default() -> Self {
        Self { no_overlap: true, node_spread: true, shared_frame: false }
    }
}

impl NetworkTopology {
    /// All qubit ids, ascending. This is the global state's qubit order.
    pub fn qubit_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.sources.iter().flat_map(|s| s.qubits.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn node_partition(&self) -> Vec<(String, Vec<usize>)> {
        self.nodes.iter().map(|n| (n.id.clone(), n.qubits.clone())).collect()
    }

    /// Structural validation against a profile. Checks source arities and id
    /// references unconditionally; overlap and node-spread only when the
    /// profile claims them.
    pub fn validate(&self, profile: &AssumptionProfile) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::config("network has no sources".to_string()));
        }
        let mut seen_source_ids = Vec::new();
        let mut all_qubits: Vec<usize> = Vec::new();
        for s in &self.sources {
            if seen_source_ids.contains(&&s.id) {
                return Err(Error::config(format!("duplicate source id {}", s.id)));
            }
            seen_source_ids.push(&s.id);
            if s.qubits.len() != s.kind.arity() {
                return Err(Error::config(format!(
                    "source {} declares {} qubits but kind {:?} emits {}",
                    s.id,
                    s.qubits.len(),
                    s.kind,
                    s.kind.arity()
                )));
            }
            for &q in &s.qubits {
                if profile.no_overlap && all_qubits.contains(&q) {
                    return Err(Error::assumption(format!(
                        "qubit {q} emitted by more than one source"
                    )));
                }
                all_qubits.push(q);
            }
        }
        if all_qubits.len() > MAX_QUBITS {
            return Err(Error::config(format!(
                "network has {} qubits, the dense simulator handles at most {MAX_QUBITS}",
                all_qubits.len()
            )));
        }

        let mut seen_node_ids = Vec::new();
        let mut assigned: Vec<usize> = Vec::new();
        for n in &self.nodes {
            if seen_node_ids.contains(&&n.id) {
                return Err(Error::config(format!("duplicate node id {}", n.id)));
            }
            seen_node_ids.push(&n.id);
            for &q in &n.qubits {
                if !all_qubits.contains(&q) {
                    return Err(Error::config(format!(
                        "node {} references unknown qubit {q}",
                        n.id
                    )));
                }
                if assigned.contains(&q) {
                    return Err(Error::config(format!(
                        "qubit {q} assigned to more than one node"
                    )));
                }
                assigned.push(q);
            }
            if profile.node_spread {
                for s in &self.sources {
                    let held = s.qubits.iter().filter(|q| n.qubits.contains(q)).count();
                    if held > 1 {
                        return Err(Error::assumption(format!(
                            "node {} holds {held} qubits of source {}",
                            n.id, s.id
                        )));
                    }
                }
            }
        }
        if !self.nodes.is_empty() {
            for &q in &all_qubits {
                if !assigned.contains(&q) {
                    return Err(Error::config(format!("qubit {q} not assigned to any node")));
                }
            }
        }

        for q in self.noise.keys() {
            if !all_qubits.contains(q) {
                return Err(Error::config(format!("noise on unknown qubit {q}")));
            }
        }
        for q in self.misalignment.keys() {
            if !all_qubits.contains(q) {
                return Err(Error::config(format!("misalignment on unknown qubit {q}")));
            }
        }
        for sid in self.source_noise.keys() {
            if !self.sources.iter().any(|s| &s.id == sid) {
                return Err(Error::config(format!("source noise on unknown source {sid}")));
            }
        }
        Ok(())
    }

    /// Tensors all sources, applies source-level white noise, per-qubit
    /// channels, and misalignment rotations. Qubits end up in ascending-id
    /// order.
    pub fn assemble_global_state(&self) -> Result<DensityMatrix> {
        self.validate(&AssumptionProfile { shared_frame: false, ..Default::default() })?;
        let mut state: Option<DensityMatrix> = None;
        for s in &self.sources {
            let mut rho = make_source_state(s.kind, &s.qubits)?.to_density();
            if let Some(&p) = self.source_noise.get(&s.id) {
                rho.mix_with_noise(p, &s.qubits.clone())?;
            }
            state = Some(match state {
                None => rho,
                Some(acc) => acc.tensor(&rho)?,
            });
        }
        let mut rho = state.expect("validated networks have sources");
        let rho_sorted = rho.permute_qubits(&self.qubit_ids())?;
        rho = rho_sorted;
        for (&q, &spec) in &self.noise {
            spec.apply(&mut rho, &[q])?;
        }
        for (&q, &theta) in &self.misalignment {
            let u = measurement_unitary(theta).adjoint();
            rho.apply_unitary(&u, &[q])?;
        }
        Ok(rho)
    }
}

/// Structural equality up to relabeling of source and node ids. Kind labels
/// are ignored: two topologies agree when their source qubit sets and node
/// qubit sets coincide as sets (which also fixes the qubit-to-node links).
pub fn topology_equal(a: &NetworkTopology, b: &NetworkTopology) -> bool {
    fn canon(sets: impl Iterator<Item = Vec<usize>>) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = sets
            .map(|mut s| {
                s.sort_unstable();
                s
            })
            .collect();
        out.sort();
        out
    }
    let sa = canon(a.sources.iter().map(|s| s.qubits.clone()));
    let sb = canon(b.sources.iter().map(|s| s.qubits.clone()));
    let na = canon(a.nodes.iter().map(|n| n.qubits.clone()));
    let nb = canon(b.nodes.iter().map(|n| n.qubits.clone()));
    sa == sb && na == nb
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn five_qubit_net() -> NetworkTopology {
        NetworkTopology {
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
        }
    }

    #[test]
    fn assembly_produces_valid_state() {
        let rho = five_qubit_net().assemble_global_state().unwrap();
        rho.validate().unwrap();
        assert_eq!(rho.qubits(), &[1, 2, 3, 4, 5]);
        // GHZ block reduced to qubit 1 is maximally mixed
        let r = rho.partial_trace(&[1]).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn overlap_violates_assumption_a() {
        let mut net = five_qubit_net();
        net.sources[1].qubits = vec![3, 5];
        net.nodes[0].qubits = vec![1];
        net.nodes[1].qubits = vec![2, 5];
        let err = net.validate(&AssumptionProfile::default()).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
    }

    #[test]
    fn node_spread_violation_detected() {
        let mut net = five_qubit_net();
        net.nodes[0].qubits = vec![1, 2];
        net.nodes[1].qubits = vec![4, 5];
        let err = net.validate(&AssumptionProfile::default()).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
    }

    #[test]
    fn topology_equality_ignores_labels() {
        let a = five_qubit_net();
        let mut b = five_qubit_net();
        b.sources[0].id = "renamed".into();
        b.sources.swap(0, 1);
        b.nodes[2].id = "other".into();
        assert!(topology_equal(&a, &b));
        b.nodes[2].qubits = vec![];
        assert!(!topology_equal(&a, &b));
    }

    #[test]
    fn misalignment_is_absorbed_by_matching_frame() {
        use crate::measure::{born_probabilities, BasisType, MeasurementFrame, QubitFrame};
        let theta = [0.4, -0.9, 1.3];
        let mut net = five_qubit_net();
        net.misalignment.insert(4, theta);
        let rho = net.assemble_global_state().unwrap();
        let mut settings = std::collections::BTreeMap::new();
        settings.insert(4, QubitFrame { theta, basis: BasisType::Ztype });
        settings.insert(5, QubitFrame { theta: [0.0; 3], basis: BasisType::Ztype });
        let d = born_probabilities(&rho, &MeasurementFrame::new(settings), &[4, 5]).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(d.probs()[3], 0.5, epsilon = 1e-10);
    }
}
