//! Shared fixtures: reference networks, a seeded random network generator
//! for round-trip checks, and random-state helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qtopo_core::measure::{BasisType, MeasurementFrame};
use qtopo_core::network::{NetworkTopology, Node, Source};
use qtopo_core::qstate::{DensityMatrix, SourceKind};
use qtopo_core::rng::{substream, Domain};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random full-rank density matrix on the given qubits (Ginibre ensemble).
pub fn random_density(rng: &mut ChaCha8Rng, qubits: &[usize]) -> DensityMatrix {
    let d = 1usize << qubits.len();
    let g = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let mut m = &g * g.adjoint();
    let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    m /= Complex64::new(tr, 0.0);
    DensityMatrix::new(m, qubits.to_vec()).expect("ginibre states are valid")
}

/// Random measurement frame with independent angles per qubit.
pub fn random_frame(rng: &mut ChaCha8Rng, qubits: &[usize], basis: BasisType) -> MeasurementFrame {
    let entries: Vec<(usize, [f64; 3])> = qubits
        .iter()
        .map(|&q| {
            (
                q,
                [
                    rng.random::<f64>() * std::f64::consts::TAU,
                    rng.random::<f64>() * std::f64::consts::TAU,
                    rng.random::<f64>() * std::f64::consts::TAU,
                ],
            )
        })
        .collect();
    MeasurementFrame::from_angles(&entries, basis)
}

/// Deterministic stream for test loops.
pub fn test_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    substream(seed, Domain::Synthesis, &[tag])
}

/// Five qubits: one GHZ triple {1,2,3} and one EPR pair {4,5}, spread over
/// three nodes.
pub fn five_qubit_network() -> NetworkTopology {
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

/// Three nodes pairwise connected by EPR sources.
pub fn epr_triangle_network() -> NetworkTopology {
    NetworkTopology {
        sources: vec![
            Source { id: "ab".into(), kind: SourceKind::Epr, qubits: vec![0, 1] },
            Source { id: "bc".into(), kind: SourceKind::Epr, qubits: vec![2, 3] },
            Source { id: "ca".into(), kind: SourceKind::Epr, qubits: vec![4, 5] },
        ],
        nodes: vec![
            Node { id: "a".into(), qubits: vec![0, 5] },
            Node { id: "b".into(), qubits: vec![1, 2] },
            Node { id: "c".into(), qubits: vec![3, 4] },
        ],
        ..Default::default()
    }
}

/// Three nodes joined by two GHZ triples.
pub fn double_ghz_network() -> NetworkTopology {
    NetworkTopology {
        sources: vec![
            Source { id: "g1".into(), kind: SourceKind::Ghz(3), qubits: vec![0, 2, 4] },
            Source { id: "g2".into(), kind: SourceKind::Ghz(3), qubits: vec![1, 3, 5] },
        ],
        nodes: vec![
            Node { id: "a".into(), qubits: vec![0, 1] },
            Node { id: "b".into(), qubits: vec![2, 3] },
            Node { id: "c".into(), qubits: vec![4, 5] },
        ],
        ..Default::default()
    }
}

/// Random noiseless GHZ-only network: up to five sources of arity two to
/// four, at most ten qubits, qubits dealt to at most six nodes with no node
/// holding two qubits of one source.
pub fn random_ghz_network(seed: u64) -> NetworkTopology {
    let mut rng = substream(seed, Domain::Synthesis, &[seed]);
    let n_sources: usize = rng.random_range(1..=5);
    let mut sources = Vec::new();
    let mut next_qubit = 1usize;
    let mut budget = 10usize;
    for s in 0..n_sources {
        let reserved = 2 * (n_sources - s - 1);
        if budget < 2 + reserved {
            break;
        }
        let max_m = (budget - reserved).min(4);
        let m = rng.random_range(2..=max_m);
        let qubits: Vec<usize> = (next_qubit..next_qubit + m).collect();
        next_qubit += m;
        budget -= m;
        sources.push(Source { id: format!("g{s}"), kind: SourceKind::Ghz(m), qubits });
    }
    let max_arity = sources.iter().map(|s| s.qubits.len()).max().expect("nonempty");
    let n_nodes: usize = rng.random_range(max_arity..=6);
    let mut nodes: Vec<Node> = (0..n_nodes)
        .map(|i| Node { id: format!("n{i}"), qubits: Vec::new() })
        .collect();
    for source in &sources {
        let mut order: Vec<usize> = (0..n_nodes).collect();
        for (slot, &q) in source.qubits.iter().enumerate() {
            let pick = rng.random_range(slot..n_nodes);
            order.swap(slot, pick);
            nodes[order[slot]].qubits.push(q);
        }
    }
    nodes.retain(|n| !n.qubits.is_empty());
    NetworkTopology { sources, nodes, ..Default::default() }
}
