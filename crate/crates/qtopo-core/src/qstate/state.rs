use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::STATE_TOL;

pub type C = Complex<f64>;
pub type CMat = DMatrix<C>;
pub type CVec = DVector<C>;

/// A normalized pure state over an ordered list of qubit ids.
///
/// Indexing is big-endian: `qubits()[0]` is the most significant bit of a
/// basis-state index.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: CVec,
    qubits: Vec<usize>,
}

impl PureState {
    /// Builds a state from amplitudes; requires `len == 2^qubits.len()`,
    /// unit norm within tolerance, and distinct qubit ids.
    pub fn new(amplitudes: CVec, qubits: Vec<usize>) -> Result<Self> {
        let d = 1usize << qubits.len();
        if amplitudes.len() != d {
            return Err(Error::dimension(format!(
                "amplitude vector has length {}, expected {} for {} qubits",
                amplitudes.len(),
                d,
                qubits.len()
            )));
        }
        check_distinct(&qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::numeric(format!("state norm^2 = {norm}, expected 1")));
        }
        Ok(Self { amplitudes, qubits })
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    /// Outer product |psi><psi|.
    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            mat: m,
            qubits: self.qubits.clone(),
        }
    }

    /// Kronecker product; qubit ids must not overlap.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let qubits = concat_distinct(&self.qubits, &other.qubits)?;
        Ok(PureState {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            qubits,
        })
    }
}

/// A density matrix over an ordered list of qubit ids (big-endian indexing).
///
/// Valid states are Hermitian, unit-trace within `STATE_TOL`, and positive
/// semidefinite up to an eigenvalue floor of `-STATE_TOL`; `validate` checks
/// all three.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMat,
    qubits: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(mat: CMat, qubits: Vec<usize>) -> Result<Self> {
        let d = 1usize << qubits.len();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::dimension(format!(
                "matrix is {}x{}, expected {d}x{d} for {} qubits",
                mat.nrows(),
                mat.ncols(),
                qubits.len()
            )));
        }
        check_distinct(&qubits)?;
        Ok(Self { mat, qubits })
    }

    /// Maximally mixed state I/2^n.
    pub fn maximally_mixed(qubits: Vec<usize>) -> Result<Self> {
        let d = 1usize << qubits.len();
        let mat = CMat::identity(d, d) * C::new(1.0 / d as f64, 0.0);
        Self::new(mat, qubits)
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    fn position_of(&self, qubit: usize) -> Result<usize> {
        self.qubits
            .iter()
            .position(|&q| q == qubit)
            .ok_or_else(|| Error::dimension(format!("qubit {qubit} not in state")))
    }

    fn positions_of(&self, qubits: &[usize]) -> Result<Vec<usize>> {
        qubits.iter().map(|&q| self.position_of(q)).collect()
    }

    /// Checks Hermiticity, trace 1, and the PSD eigenvalue floor.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for r in 0..d {
            for c in r..d {
                let diff = self.mat[(r, c)] - self.mat[(c, r)].conj();
                if diff.norm() > STATE_TOL {
                    return Err(Error::numeric(format!(
                        "not Hermitian at ({r},{c}): asymmetry {}",
                        diff.norm()
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::numeric(format!("trace = {tr}, expected 1")));
        }
        self.eigenvalues_clamped()?;
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Tr(rho^2).
    pub fn purity(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                s += (self.mat[(r, c)] * self.mat[(c, r)]).re;
            }
        }
        s
    }

    /// Eigenvalues sorted descending, clamped to zero from above the floor
    /// `-STATE_TOL`; anything lower is a numeric error.
    pub fn eigenvalues_clamped(&self) -> Result<Vec<f64>> {
        let eig = self.hermitian_eigenvalues()?;
        let mut vals: Vec<f64> = Vec::with_capacity(eig.len());
        for v in eig {
            if v < -STATE_TOL {
                return Err(Error::numeric(format!(
                    "eigenvalue {v} below the -{STATE_TOL} floor"
                )));
            }
            vals.push(v.max(0.0));
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        Ok(vals)
    }

    /// Eigenvalue backend with a degeneracy workaround: the QR iteration can
    /// emit non-finite values on exactly degenerate product-state spectra. A
    /// graded diagonal shift breaks the ties; it moves every eigenvalue by
    /// less than its largest entry (1e-12), far below any tolerance in use.
    fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let usable = |eig: &nalgebra::DVector<f64>, trace: f64| -> bool {
            eig.iter().all(|v| v.is_finite()) && (eig.sum() - trace).abs() < 1e-7
        };
        let tr = self.trace();
        let eig = self.mat.clone().symmetric_eigenvalues();
        if usable(&eig, tr) {
            return Ok(eig.iter().copied().collect());
        }
        let d = self.dim();
        let mut shifted = self.mat.clone();
        for i in 0..d {
            shifted[(i, i)] += C::new(1e-12 * (i + 1) as f64 / d as f64, 0.0);
        }
        let shift_total: f64 = (1..=d).map(|i| 1e-12 * i as f64 / d as f64).sum();
        let eig = shifted.symmetric_eigenvalues();
        if usable(&eig, tr + shift_total) {
            return Ok(eig.iter().copied().collect());
        }
        Err(Error::numeric(
            "eigenvalue iteration did not converge".to_string(),
        ))
    }

    /// Kronecker product; qubit ids must not overlap.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let qubits = concat_distinct(&self.qubits, &other.qubits)?;
        Ok(DensityMatrix {
            mat: self.mat.kronecker(&other.mat),
            qubits,
        })
    }

    /// Traces out every qubit not in `keep`; the kept qubits stay in the
    /// relative order they had in this state. `keep` may be in any order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let mut keep_pos = self.positions_of(keep)?;
        check_distinct(keep)?;
        keep_pos.sort_unstable();
        let n = self.num_qubits();
        let env_pos: Vec<usize> = (0..n).filter(|p| !keep_pos.contains(p)).collect();
        let k = keep_pos.len();
        let dk = 1usize << k;
        let de = 1usize << env_pos.len();

        // offsets of each kept-subsystem index / environment index in the
        // full-space index
        let offset = |positions: &[usize], idx: usize| -> usize {
            let mut off = 0usize;
            for (l, &p) in positions.iter().enumerate() {
                let bit = (idx >> (positions.len() - 1 - l)) & 1;
                off |= bit << (n - 1 - p);
            }
            off
        };
        let keep_off: Vec<usize> = (0..dk).map(|i| offset(&keep_pos, i)).collect();
        let env_off: Vec<usize> = (0..de).map(|e| offset(&env_pos, e)).collect();

        let mut out = CMat::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut s = C::new(0.0, 0.0);
                for &e in &env_off {
                    s += self.mat[(keep_off[i] + e, keep_off[j] + e)];
                }
                out[(i, j)] = s;
            }
        }
        let kept_qubits: Vec<usize> = keep_pos.iter().map(|&p| self.qubits[p]).collect();
        DensityMatrix::new(out, kept_qubits)
    }

    /// Reorders the qubit labels; `new_order` must be a permutation of the
    /// current qubits.
    pub fn permute_qubits(&self, new_order: &[usize]) -> Result<DensityMatrix> {
        if new_order.len() != self.num_qubits() {
            return Err(Error::dimension("permutation length mismatch".to_string()));
        }
        let pos = self.positions_of(new_order)?;
        check_distinct(new_order)?;
        let n = self.num_qubits();
        let d = self.dim();
        // index map: bit at old position pos[l] becomes bit l of the new index
        let remap = |idx: usize| -> usize {
            let mut out = 0usize;
            for (l, &p) in pos.iter().enumerate() {
                let bit = (idx >> (n - 1 - p)) & 1;
                out |= bit << (n - 1 - l);
            }
            out
        };
        let mut out = CMat::zeros(d, d);
        for r in 0..d {
            let nr = remap(r);
            for c in 0..d {
                out[(nr, remap(c))] = self.mat[(r, c)];
            }
        }
        DensityMatrix::new(out, new_order.to_vec())
    }

    /// Applies a k-qubit unitary to `targets` (rho -> U rho U^dag). The gate's
    /// own index order is big-endian over `targets`.
    pub fn apply_unitary(&mut self, u: &CMat, targets: &[usize]) -> Result<()> {
        let blocks = self.block_layout(targets, u.nrows())?;
        let dk = u.nrows();
        let mut block = CMat::zeros(dk, dk);
        for &rb in &blocks.bases {
            for &cb in &blocks.bases {
                for a in 0..dk {
                    for b in 0..dk {
                        block[(a, b)] = self.mat[(rb + blocks.offsets[a], cb + blocks.offsets[b])];
                    }
                }
                let rotated = u * &block * u.adjoint();
                for a in 0..dk {
                    for b in 0..dk {
                        self.mat[(rb + blocks.offsets[a], cb + blocks.offsets[b])] =
                            rotated[(a, b)];
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a channel given by Kraus operators on `targets`
    /// (rho -> sum_K K rho K^dag). Completeness sum_K K^dag K = I is enforced
    /// within `STATE_TOL`.
    pub fn apply_kraus(&mut self, kraus: &[CMat], targets: &[usize]) -> Result<()> {
        if kraus.is_empty() {
            return Err(Error::invalid("empty Kraus set".to_string()));
        }
        let dk = kraus[0].nrows();
        let mut completeness = CMat::zeros(dk, dk);
        for k in kraus {
            if k.nrows() != dk || k.ncols() != dk {
                return Err(Error::dimension("ragged Kraus set".to_string()));
            }
            completeness += k.adjoint() * k;
        }
        let id = CMat::identity(dk, dk);
        if (&completeness - &id).norm() > STATE_TOL * dk as f64 {
            return Err(Error::numeric(
                "Kraus operators do not satisfy completeness".to_string(),
            ));
        }

        let blocks = self.block_layout(targets, dk)?;
        let mut block = CMat::zeros(dk, dk);
        for &rb in &blocks.bases {
            for &cb in &blocks.bases {
                for a in 0..dk {
                    for b in 0..dk {
                        block[(a, b)] = self.mat[(rb + blocks.offsets[a], cb + blocks.offsets[b])];
                    }
                }
                let mut acc = CMat::zeros(dk, dk);
                for k in kraus {
                    acc += k * &block * k.adjoint();
                }
                for a in 0..dk {
                    for b in 0..dk {
                        self.mat[(rb + blocks.offsets[a], cb + blocks.offsets[b])] = acc[(a, b)];
                    }
                }
            }
        }
        Ok(())
    }

    /// White-noise mixing on `targets`:
    /// rho -> p rho + (1-p) (I/2^k over targets) tensor tr_targets(rho).
    /// With `targets` covering every qubit this is rho -> p rho + (1-p) I/d.
    pub fn mix_with_noise(&mut self, p: f64, targets: &[usize]) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("mixing weight p = {p} outside [0, 1]")));
        }
        let t_pos = self.positions_of(targets)?;
        check_distinct(targets)?;
        let n = self.num_qubits();
        let k = targets.len();
        let rest: Vec<usize> = self
            .qubits
            .iter()
            .copied()
            .filter(|q| !targets.contains(q))
            .collect();
        let sigma = if rest.is_empty() {
            None
        } else {
            Some(self.partial_trace(&rest)?)
        };

        let d = self.dim();
        let target_bits = |idx: usize| -> usize {
            let mut b = 0usize;
            for (l, &p_) in t_pos.iter().enumerate() {
                b |= ((idx >> (n - 1 - p_)) & 1) << (k - 1 - l);
            }
            b
        };
        let env_bits = |idx: usize| -> usize {
            let mut b = 0usize;
            let mut l = 0;
            for p_ in 0..n {
                if !t_pos.contains(&p_) {
                    b |= ((idx >> (n - 1 - p_)) & 1) << (n - k - 1 - l);
                    l += 1;
                }
            }
            b
        };
        let w = (1.0 - p) / (1usize << k) as f64;
        for r in 0..d {
            for c in 0..d {
                let mut v = self.mat[(r, c)] * C::new(p, 0.0);
                if target_bits(r) == target_bits(c) {
                    let env = match &sigma {
                        Some(s) => s.mat[(env_bits(r), env_bits(c))],
                        None => C::new(1.0, 0.0),
                    };
                    v += env * C::new(w, 0.0);
                }
                self.mat[(r, c)] = v;
            }
        }
        Ok(())
    }

    fn block_layout(&self, targets: &[usize], gate_dim: usize) -> Result<BlockLayout> {
        let t_pos = self.positions_of(targets)?;
        check_distinct(targets)?;
        let k = targets.len();
        if gate_dim != 1usize << k {
            return Err(Error::dimension(format!(
                "operator dim {gate_dim} does not match {k} target qubits"
            )));
        }
        let n = self.num_qubits();
        let d = self.dim();
        let mask: usize = t_pos.iter().map(|&p| 1usize << (n - 1 - p)).sum();
        let offsets: Vec<usize> = (0..gate_dim)
            .map(|a| {
                let mut off = 0usize;
                for (l, &p) in t_pos.iter().enumerate() {
                    off |= ((a >> (k - 1 - l)) & 1) << (n - 1 - p);
                }
                off
            })
            .collect();
        let bases: Vec<usize> = (0..d).filter(|i| i & mask == 0).collect();
        Ok(BlockLayout { bases, offsets })
    }
}

struct BlockLayout {
    /// Full-space indices whose target bits are all zero.
    bases: Vec<usize>,
    /// Full-space offset of each target-subsystem basis index.
    offsets: Vec<usize>,
}

fn check_distinct(ids: &[usize]) -> Result<()> {
    for (i, a) in ids.iter().enumerate() {
        if ids[i + 1..].contains(a) {
            return Err(Error::dimension(format!("duplicate qubit id {a}")));
        }
    }
    Ok(())
}

fn concat_distinct(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let mut out = a.to_vec();
    for &q in b {
        if out.contains(&q) {
            return Err(Error::dimension(format!(
                "qubit id {q} present in both factors"
            )));
        }
        out.push(q);
    }
    Ok(out)
}
