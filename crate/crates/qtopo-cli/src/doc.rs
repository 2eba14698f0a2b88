//! On-disk report documents: correlation matrices as TOML (round-trippable)
//! and as CSV (one file per matrix).

use std::io::Write as _;
use std::path::Path;

use qtopo_core::error::{Error, Result};
use qtopo_core::optimize::{CorrelationMatrix, EntryProvenance, MatrixKind};
use serde::{Deserialize, Serialize};

/// One qubit's frame angles inside a provenance record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameDoc {
    pub qubit: usize,
    pub theta: [f64; 3],
}

/// Where one matrix entry came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceDoc {
    pub i: usize,
    pub j: usize,
    pub best_trial: usize,
    pub trials_run: usize,
    pub clamped: bool,
    pub frame: Vec<FrameDoc>,
}

/// One matrix: kind, group labels, row-major values, entry provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixEntryDoc {
    pub kind: String,
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub provenance: Vec<ProvenanceDoc>,
}

/// Knobs the run was invoked with, echoed into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub trials: usize,
    pub qem: String,
}

/// The `matrices.toml` document: a `[run]` header and `[[matrix]]` tables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MatricesDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunMeta>,
    #[serde(default, rename = "matrix")]
    pub matrices: Vec<MatrixEntryDoc>,
}

pub fn kind_name(kind: MatrixKind) -> &'static str {
    match kind {
        MatrixKind::QubitwiseUncertainty => "qubitwise_uncertainty",
        MatrixKind::QubitwiseCharacteristic => "qubitwise_characteristic",
        MatrixKind::Covariance => "covariance",
        MatrixKind::NodewiseUncertainty => "nodewise_uncertainty",
        MatrixKind::NodewiseCharacteristic => "nodewise_characteristic",
    }
}

pub fn parse_kind(name: &str) -> Result<MatrixKind> {
    match name {
        "qubitwise_uncertainty" => Ok(MatrixKind::QubitwiseUncertainty),
        "qubitwise_characteristic" => Ok(MatrixKind::QubitwiseCharacteristic),
        "covariance" => Ok(MatrixKind::Covariance),
        "nodewise_uncertainty" => Ok(MatrixKind::NodewiseUncertainty),
        "nodewise_characteristic" => Ok(MatrixKind::NodewiseCharacteristic),
        other => Err(Error::config(format!("unknown matrix kind '{other}'"))),
    }
}

/// File stem for a matrix kind ("qubitwise-uncertainty" and friends).
pub fn kind_stem(kind: MatrixKind) -> String {
    kind_name(kind).replace('_', "-")
}

pub fn matrix_to_doc(m: &CorrelationMatrix) -> MatrixEntryDoc {
    let n = m.n();
    let values = (0..n)
        .map(|i| (0..n).map(|j| m.value(i, j)).collect())
        .collect();
    let provenance = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let p = m.provenance(i, j);
            ProvenanceDoc {
                i,
                j,
                best_trial: p.best_trial,
                trials_run: p.trials_run,
                clamped: p.clamped,
                frame: p
                    .frame
                    .iter()
                    .map(|&(qubit, theta)| FrameDoc { qubit, theta })
                    .collect(),
            }
        })
        .collect();
    MatrixEntryDoc {
        kind: kind_name(m.kind).to_string(),
        labels: m.labels.clone(),
        values,
        provenance,
    }
}

/// Rebuilds a matrix from its document form, validating shape, finiteness,
/// provenance coverage, and (for symmetric kinds) symmetry.
pub fn doc_to_matrix(doc: &MatrixEntryDoc) -> Result<CorrelationMatrix> {
    let kind = parse_kind(&doc.kind)?;
    let n = doc.labels.len();
    let bad = |msg: String| Error::config(format!("matrix '{}': {msg}", doc.kind));
    if n == 0 {
        return Err(bad("no labels".to_string()));
    }
    for (i, a) in doc.labels.iter().enumerate() {
        if a.is_empty() {
            return Err(bad("empty label".to_string()));
        }
        if doc.labels[i + 1..].contains(a) {
            return Err(bad(format!("duplicate label '{a}'")));
        }
    }
    if doc.values.len() != n || doc.values.iter().any(|row| row.len() != n) {
        return Err(bad(format!("values are not {n}x{n}")));
    }
    let mut values = nalgebra::DMatrix::zeros(n, n);
    for (i, row) in doc.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(bad(format!("entry ({i}, {j}) is not finite")));
            }
            values[(i, j)] = v;
        }
    }
    if kind.symmetric() {
        for i in 0..n {
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-9 {
                    return Err(bad(format!("entry ({i}, {j}) breaks symmetry")));
                }
            }
        }
    }
    if doc.provenance.len() != n * n {
        return Err(bad(format!(
            "expected {} provenance records, got {}",
            n * n,
            doc.provenance.len()
        )));
    }
    let mut provenance = vec![None; n * n];
    for p in &doc.provenance {
        if p.i >= n || p.j >= n {
            return Err(bad(format!("provenance index ({}, {}) out of range", p.i, p.j)));
        }
        let slot = &mut provenance[p.i * n + p.j];
        if slot.is_some() {
            return Err(bad(format!("duplicate provenance for ({}, {})", p.i, p.j)));
        }
        *slot = Some(EntryProvenance {
            frame: p.frame.iter().map(|f| (f.qubit, f.theta)).collect(),
            best_trial: p.best_trial,
            trials_run: p.trials_run,
            clamped: p.clamped,
        });
    }
    let provenance = provenance
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("provenance does not cover every entry".to_string()))?;
    Ok(CorrelationMatrix {
        kind,
        labels: doc.labels.clone(),
        values,
        provenance,
    })
}

pub fn write_matrices_toml(path: &Path, doc: &MatricesDoc) -> Result<()> {
    let text = toml::to_string_pretty(doc)
        .map_err(|e| Error::config(format!("serializing matrices: {e}")))?;
    write_text(path, &text)
}

pub fn load_matrices_toml(path: &Path) -> Result<Vec<CorrelationMatrix>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let doc: MatricesDoc =
        toml::from_str(&text).map_err(|e| Error::config(format!("parsing matrices: {e}")))?;
    doc.matrices.iter().map(doc_to_matrix).collect()
}

/// Writes one matrix as CSV: a `label` column then one column per group.
/// Floats go through `Display`, which round-trips exactly.
pub fn write_matrix_csv(path: &Path, m: &CorrelationMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| Error::config(format!("writing {}: {e}", path.display()));
    let mut header = vec!["label".to_string()];
    header.extend(m.labels.iter().cloned());
    w.write_record(&header).map_err(io_err)?;
    for i in 0..m.n() {
        let mut row = vec![m.labels[i].clone()];
        row.extend((0..m.n()).map(|j| m.value(i, j).to_string()));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::config(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// Writes a generic CSV table with the given header and float rows; the
/// first column may carry a string key.
pub fn write_table_csv(
    path: &Path,
    header: &[&str],
    rows: &[(String, Vec<f64>)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| Error::config(format!("writing {}: {e}", path.display()));
    w.write_record(header).map_err(io_err)?;
    for (key, vals) in rows {
        let mut row = vec![key.clone()];
        row.extend(vals.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::config(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::config(format!("writing {}: {e}", path.display())))?;
    Ok(())
}
