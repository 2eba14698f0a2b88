//! Declarative network description: TOML serialization of `NetworkTopology`.
//!
//! ```toml
//! [[sources]]
//! id = "g1"
//! kind = "ghz"
//! qubits = [1, 2, 3]
//!
//! [[sources]]
//! id = "e1"
//! kind = "generalized_epr"
//! angle = 0.3926990817
//! qubits = [4, 5]
//!
//! [[nodes]]
//! id = "c1"
//! qubits = [1, 4]
//!
//! [[noise]]
//! qubit = 4
//! channel = "depolarizing"
//! gamma = 0.2
//!
//! [[source_noise]]
//! source = "g1"
//! p = 0.95
//!
//! [[misalignment]]
//! qubit = 2
//! theta = [0.1, 0.2, 0.3]
//! ```

use serde::{Deserialize, Serialize};

use super::{NetworkTopology, Node, Source};
use crate::error::{Error, Result};
use crate::qstate::{NoiseSpec, SourceKind};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkConfig {
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
    #[serde(default)]
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<NoiseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_noise: Vec<SourceNoiseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub misalignment: Vec<MisalignmentEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SourceEntry {
    pub id: String,
    pub kind: KindName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Ghz,
    Epr,
    W3,
    GeneralizedEpr,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeEntry {
    pub id: String,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoiseEntry {
    pub qubit: usize,
    #[serde(flatten)]
    pub spec: NoiseSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SourceNoiseEntry {
    pub source: String,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MisalignmentEntry {
    pub qubit: usize,
    pub theta: [f64; 3],
}

impl NetworkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("network config: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("network config: {e}")))
    }

    pub fn to_topology(&self) -> Result<NetworkTopology> {
        let sources = self
            .sources
            .iter()
            .map(|s| {
                let kind = match s.kind {
                    KindName::Ghz => SourceKind::Ghz(s.qubits.len()),
                    KindName::Epr => SourceKind::Epr,
                    KindName::W3 => SourceKind::W3,
                    KindName::GeneralizedEpr => SourceKind::GeneralizedEpr {
                        angle: s.angle.ok_or_else(|| {
                            Error::config(format!("source {}: generalized_epr needs an angle", s.id))
                        })?,
                    },
                };
                if !matches!(s.kind, KindName::GeneralizedEpr) && s.angle.is_some() {
                    return Err(Error::config(format!(
                        "source {}: angle is only valid for generalized_epr",
                        s.id
                    )));
                }
                Ok(Source { id: s.id.clone(), kind, qubits: s.qubits.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node { id: n.id.clone(), qubits: n.qubits.clone() })
            .collect();
        let mut noise = std::collections::BTreeMap::new();
        for e in &self.noise {
            if noise.insert(e.qubit, e.spec).is_some() {
                return Err(Error::config(format!("duplicate noise entry for qubit {}", e.qubit)));
            }
        }
        let mut source_noise = std::collections::BTreeMap::new();
        for e in &self.source_noise {
            if source_noise.insert(e.source.clone(), e.p).is_some() {
                return Err(Error::config(format!("duplicate source noise for {}", e.source)));
            }
        }
        let mut misalignment = std::collections::BTreeMap::new();
        for e in &self.misalignment {
            if misalignment.insert(e.qubit, e.theta).is_some() {
                return Err(Error::config(format!(
                    "duplicate misalignment entry for qubit {}",
                    e.qubit
                )));
            }
        }
        Ok(NetworkTopology { sources, nodes, noise, source_noise, misalignment })
    }

    pub fn from_topology(t: &NetworkTopology) -> Self {
        let sources = t
            .sources
            .iter()
            .map(|s| {
                let (kind, angle) = match s.kind {
                    SourceKind::Ghz(_) => (KindName::Ghz, None),
                    SourceKind::Epr => (KindName::Epr, None),
                    SourceKind::W3 => (KindName::W3, None),
                    SourceKind::GeneralizedEpr { angle } => (KindName::GeneralizedEpr, Some(angle)),
                };
                SourceEntry { id: s.id.clone(), kind, angle, qubits: s.qubits.clone() }
            })
            .collect();
        let nodes = t
            .nodes
            .iter()
            .map(|n| NodeEntry { id: n.id.clone(), qubits: n.qubits.clone() })
            .collect();
        NetworkConfig {
            sources,
            nodes,
            noise: t.noise.iter().map(|(&qubit, &spec)| NoiseEntry { qubit, spec }).collect(),
            source_noise: t
                .source_noise
                .iter()
                .map(|(source, &p)| SourceNoiseEntry { source: source.clone(), p })
                .collect(),
            misalignment: t
                .misalignment
                .iter()
                .map(|(&qubit, &theta)| MisalignmentEntry { qubit, theta })
                .collect(),
        }
    }
}
