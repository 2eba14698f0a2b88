//! Gradient-descent frame optimization and correlation-matrix assembly.
//!
//! Every matrix entry is an independent optimization over the local
//! measurement frames of the qubits it involves: multiple random restarts,
//! plain gradient descent, best cost seen wins. Gradients flow through the
//! outcome probabilities either by exact parameter-shift rules or by central
//! finite differences on the sampled cost (with common random numbers, so
//! shot noise largely cancels in the difference).

mod cost;

pub use cost::{CostKind, CostModel, Evaluation, Mitigation, SamplingPlan};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::measure::OutcomeDistribution;
use crate::qstate::DensityMatrix;
use crate::rng::{substream, Domain};

/// Distribution realization budget for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotPlan {
    Exact,
    Shots(u64),
}

/// How a total shot budget maps onto basis rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShotSplit {
    /// Every basis round gets the full budget.
    #[default]
    PerBasis,
    /// The budget is divided evenly across rounds.
    SplitTotal,
}

/// Gradient estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    /// Exact probability-level shift rules (two points per parameter for
    /// plain measurements, four for frequency-two pipelines).
    ParameterShift,
    /// Central differences of the cost with step `h`; under sampling, both
    /// sides reuse one random stream.
    FiniteDifference { h: f64 },
}

/// Fully resolved optimizer parameters for one entry.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub steps: usize,
    pub trials: usize,
    pub shots: ShotPlan,
    pub shot_split: ShotSplit,
    pub gradient: GradientMode,
    pub seed: u64,
    pub keep_traces: bool,
}

impl OptimizerConfig {
    /// Exact-evaluation defaults for a cost kind.
    pub fn exact_for(kind: CostKind) -> Self {
        Self {
            step_size: kind.default_step_size(),
            steps: kind.default_steps(),
            trials: 20,
            shots: ShotPlan::Exact,
            shot_split: ShotSplit::PerBasis,
            gradient: GradientMode::ParameterShift,
            seed: 0,
            keep_traces: false,
        }
    }

    /// Finite-shot defaults: finite-difference gradients with a pi/64 step.
    pub fn sampled_for(kind: CostKind, shots: u64, seed: u64) -> Self {
        Self {
            shots: ShotPlan::Shots(shots),
            gradient: GradientMode::FiniteDifference {
                h: std::f64::consts::PI / 64.0,
            },
            seed,
            ..Self::exact_for(kind)
        }
    }
}

/// Partially specified optimizer parameters; unset fields fall back to the
/// per-kind defaults when resolved.
#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    pub step_size: Option<f64>,
    pub steps: Option<usize>,
    pub trials: usize,
    pub shots: ShotPlan,
    pub shot_split: ShotSplit,
    pub gradient: Option<GradientMode>,
    pub seed: u64,
    pub keep_traces: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            step_size: None,
            steps: None,
            trials: 20,
            shots: ShotPlan::Exact,
            shot_split: ShotSplit::PerBasis,
            gradient: None,
            seed: 0,
            keep_traces: false,
        }
    }
}

impl OptimizerSettings {
    pub fn resolve(&self, kind: CostKind) -> OptimizerConfig {
        let gradient = self.gradient.unwrap_or(match self.shots {
            ShotPlan::Exact => GradientMode::ParameterShift,
            ShotPlan::Shots(_) => GradientMode::FiniteDifference {
                h: std::f64::consts::PI / 64.0,
            },
        });
        OptimizerConfig {
            step_size: self.step_size.unwrap_or_else(|| kind.default_step_size()),
            steps: self.steps.unwrap_or_else(|| kind.default_steps()),
            trials: self.trials,
            shots: self.shots,
            shot_split: self.shot_split,
            gradient,
            seed: self.seed,
            keep_traces: self.keep_traces,
        }
    }
}

/// Cost history of one restart; `costs` has `steps + 1` entries (initial
/// point included).
#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub trial: usize,
    pub costs: Vec<f64>,
    pub clamped: bool,
}

/// Outcome of one entry optimization.
#[derive(Debug, Clone)]
pub struct EntryResult {
    /// The optimized quantity in its reported orientation (minimum for
    /// uncertainties, maximum otherwise).
    pub value: f64,
    /// Internal minimized cost at the optimum.
    pub cost: f64,
    /// Optimal angles per qubit.
    pub angles: Vec<(usize, [f64; 3])>,
    pub best_trial: usize,
    pub trials_run: usize,
    pub clamped: bool,
    /// Per-trial histories; empty unless `keep_traces` was set.
    pub traces: Vec<OptimizationTrace>,
}

struct TrialOutcome {
    best_cost: f64,
    best_theta: Vec<f64>,
    costs: Vec<f64>,
    clamped: bool,
}

fn shots_per_round(cfg: &OptimizerConfig, rounds: usize) -> Option<u64> {
    match cfg.shots {
        ShotPlan::Exact => None,
        ShotPlan::Shots(n) => Some(match cfg.shot_split {
            ShotSplit::PerBasis => n,
            ShotSplit::SplitTotal => (n / rounds as u64).max(1),
        }),
    }
}

fn make_plan(
    spr: Option<u64>,
    seed: u64,
    entry: (u64, u64),
    trial: u64,
    step: u64,
    probe: u64,
) -> SamplingPlan {
    match spr {
        None => SamplingPlan::Exact,
        Some(shots) => SamplingPlan::Sampled {
            shots,
            master: seed,
            tags: [entry.0, entry.1, trial, step, probe],
        },
    }
}

/// Minimizes the model's cost over its frame angles with random-restart
/// gradient descent. Ties across trials resolve to the lowest trial index.
pub fn optimize_entry(
    model: &CostModel,
    cfg: &OptimizerConfig,
    entry: (u64, u64),
) -> Result<EntryResult> {
    if !model.mitigation().supports_optimization() {
        return Err(Error::invalid(
            "this mitigation pipeline has no gradients; evaluate it at the shared frame"
                .to_string(),
        ));
    }
    if cfg.trials == 0 {
        return Err(Error::invalid("at least one trial is required".to_string()));
    }
    let n = model.param_count();
    let rounds = model.kind().rounds().len();
    let spr = shots_per_round(cfg, rounds);

    let outcomes: Vec<Result<TrialOutcome>> = exec::map_range(cfg.trials, |trial| {
        run_trial(model, cfg, entry, trial as u64, n, spr)
    });

    let mut best: Option<(usize, TrialOutcome)> = None;
    let mut traces = Vec::new();
    let mut clamped_any = false;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        clamped_any |= outcome.clamped;
        if cfg.keep_traces {
            traces.push(OptimizationTrace {
                trial: idx,
                costs: outcome.costs.clone(),
                clamped: outcome.clamped,
            });
        }
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.best_cost < b.best_cost,
        };
        if better {
            best = Some((idx, outcome));
        }
    }
    let (best_trial, best) = best.expect("at least one trial");

    let angles = model
        .qubits()
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            (
                q,
                [
                    best.best_theta[3 * i],
                    best.best_theta[3 * i + 1],
                    best.best_theta[3 * i + 2],
                ],
            )
        })
        .collect();
    let value = if model.kind().minimizes() {
        best.best_cost
    } else {
        -best.best_cost
    };
    Ok(EntryResult {
        value,
        cost: best.best_cost,
        angles,
        best_trial,
        trials_run: cfg.trials,
        clamped: clamped_any,
        traces,
    })
}

fn run_trial(
    model: &CostModel,
    cfg: &OptimizerConfig,
    entry: (u64, u64),
    trial: u64,
    n: usize,
    spr: Option<u64>,
) -> Result<TrialOutcome> {
    let mut rng = substream(cfg.seed, Domain::TrialInit, &[entry.0, entry.1, trial]);
    let mut theta: Vec<f64> = (0..n)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();

    let mut costs = Vec::with_capacity(cfg.steps + 1);
    let mut clamped = false;
    let mut current = model.evaluate(&theta, &make_plan(spr, cfg.seed, entry, trial, 0, 0))?;
    clamped |= current.clamped;
    costs.push(current.cost);
    let mut best_cost = current.cost;
    let mut best_theta = theta.clone();

    for step in 1..=cfg.steps {
        let (grad, gc) = match cfg.gradient {
            GradientMode::ParameterShift => {
                shift_gradient(model, &theta, &current, spr, cfg.seed, entry, trial, step as u64)?
            }
            GradientMode::FiniteDifference { h } => {
                fd_gradient(model, &theta, h, spr, cfg.seed, entry, trial, step as u64)?
            }
        };
        clamped |= gc;
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= cfg.step_size * g;
        }
        current = model.evaluate(
            &theta,
            &make_plan(spr, cfg.seed, entry, trial, step as u64, 0),
        )?;
        clamped |= current.clamped;
        costs.push(current.cost);
        if current.cost < best_cost {
            best_cost = current.cost;
            best_theta = theta.clone();
        }
    }
    Ok(TrialOutcome {
        best_cost,
        best_theta,
        costs,
        clamped,
    })
}

/// Parameter-shift gradient through the outcome probabilities. For
/// frequency-one pipelines the classic two-point rule applies; frequency-two
/// pipelines (both state copies rotated) need the four-point rule
/// `dp = (d1 + d2) / (2 sqrt(2)) + (d1 - d2) / 2` with `d1` the difference at
/// +-pi/4 and `d2` at +-3pi/4.
#[allow(clippy::too_many_arguments)]
fn shift_gradient(
    model: &CostModel,
    theta: &[f64],
    current: &Evaluation,
    spr: Option<u64>,
    seed: u64,
    entry: (u64, u64),
    trial: u64,
    step: u64,
) -> Result<(Vec<f64>, bool)> {
    let (coeffs, clamped) = model.gradient_coefficients(&current.distributions)?;
    let freq2 = model.mitigation().frequency() > 1.5;
    let n = theta.len();
    let mut grad = vec![0.0; n];
    let mut shifted = theta.to_vec();
    for t in 0..n {
        let base_probe = 1 + 4 * t as u64;
        let mut eval_at = |delta: f64, probe: u64| -> Result<Vec<OutcomeDistribution>> {
            let orig = shifted[t];
            shifted[t] = orig + delta;
            let plan = make_plan(spr, seed, entry, trial, step, probe);
            let dists = model.distributions(&shifted, &plan)?;
            shifted[t] = orig;
            Ok(dists)
        };
        let dp: Vec<Vec<f64>> = if !freq2 {
            let plus = eval_at(std::f64::consts::FRAC_PI_2, base_probe)?;
            let minus = eval_at(-std::f64::consts::FRAC_PI_2, base_probe + 1)?;
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| {
                    p.probs()
                        .iter()
                        .zip(m.probs())
                        .map(|(a, b)| 0.5 * (a - b))
                        .collect()
                })
                .collect()
        } else {
            let p1 = eval_at(std::f64::consts::FRAC_PI_4, base_probe)?;
            let m1 = eval_at(-std::f64::consts::FRAC_PI_4, base_probe + 1)?;
            let p3 = eval_at(3.0 * std::f64::consts::FRAC_PI_4, base_probe + 2)?;
            let m3 = eval_at(-3.0 * std::f64::consts::FRAC_PI_4, base_probe + 3)?;
            let s = 0.5 / std::f64::consts::SQRT_2;
            (0..p1.len())
                .map(|r| {
                    (0..p1[r].len())
                        .map(|o| {
                            let d1 = p1[r].probs()[o] - m1[r].probs()[o];
                            let d2 = p3[r].probs()[o] - m3[r].probs()[o];
                            s * (d1 + d2) + 0.5 * (d1 - d2)
                        })
                        .collect()
                })
                .collect()
        };
        grad[t] = coeffs
            .iter()
            .zip(&dp)
            .map(|(c, d)| c.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
            .sum();
    }
    Ok((grad, clamped))
}

/// Central-difference gradient of the cost. Under sampling both sides of
/// each difference share one stream (same probe tag), so the estimate sees
/// the cost change, not two independent noise draws.
#[allow(clippy::too_many_arguments)]
fn fd_gradient(
    model: &CostModel,
    theta: &[f64],
    h: f64,
    spr: Option<u64>,
    seed: u64,
    entry: (u64, u64),
    trial: u64,
    step: u64,
) -> Result<(Vec<f64>, bool)> {
    if h <= 0.0 {
        return Err(Error::invalid(format!("difference step {h} must be positive")));
    }
    let n = theta.len();
    let mut grad = vec![0.0; n];
    let mut clamped = false;
    let mut shifted = theta.to_vec();
    for t in 0..n {
        let probe = 1 + t as u64;
        let plan = make_plan(spr, seed, entry, trial, step, probe);
        let orig = shifted[t];
        shifted[t] = orig + h;
        let plus = model.evaluate(&shifted, &plan)?;
        shifted[t] = orig - h;
        let minus = model.evaluate(&shifted, &plan)?;
        shifted[t] = orig;
        clamped |= plus.clamped || minus.clamped;
        grad[t] = (plus.cost - minus.cost) / (2.0 * h);
    }
    Ok((grad, clamped))
}

/// The five correlation-matrix families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Directional pairwise uncertainties between single qubits; diagonal
    /// holds the single-qubit uncertainties.
    QubitwiseUncertainty,
    /// Symmetric qubit matrix: maximal mutual information off the diagonal,
    /// minimal uncertainty minus one bit on it.
    QubitwiseCharacteristic,
    /// Symmetric covariance matrix of +-1 outcomes (variances on the
    /// diagonal).
    Covariance,
    /// Directional pairwise uncertainties between node qubit groups.
    NodewiseUncertainty,
    /// Symmetric node matrix: mutual information off the diagonal, minimal
    /// uncertainty minus the node size on it.
    NodewiseCharacteristic,
}

impl MatrixKind {
    pub fn symmetric(self) -> bool {
        matches!(
            self,
            MatrixKind::QubitwiseCharacteristic
                | MatrixKind::Covariance
                | MatrixKind::NodewiseCharacteristic
        )
    }

    pub fn nodewise(self) -> bool {
        matches!(
            self,
            MatrixKind::NodewiseUncertainty | MatrixKind::NodewiseCharacteristic
        )
    }

    fn diag_kind(self) -> CostKind {
        match self {
            MatrixKind::Covariance => CostKind::Variance,
            _ => CostKind::SingleUncertainty,
        }
    }

    fn offdiag_kind(self) -> CostKind {
        match self {
            MatrixKind::QubitwiseUncertainty | MatrixKind::NodewiseUncertainty => {
                CostKind::PairUncertainty
            }
            MatrixKind::QubitwiseCharacteristic | MatrixKind::NodewiseCharacteristic => {
                CostKind::MutualInformation
            }
            MatrixKind::Covariance => CostKind::Covariance,
        }
    }

    /// Characteristic diagonals subtract the group size in bits.
    fn diag_offset(self, group_len: usize) -> f64 {
        match self {
            MatrixKind::QubitwiseCharacteristic | MatrixKind::NodewiseCharacteristic => {
                -(group_len as f64)
            }
            _ => 0.0,
        }
    }
}

/// What the matrix rows/columns range over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixScope {
    Qubits(Vec<usize>),
    Nodes(Vec<(String, Vec<usize>)>),
}

impl MatrixScope {
    fn groups(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            MatrixScope::Qubits(qs) => qs.iter().map(|q| (q.to_string(), vec![*q])).collect(),
            MatrixScope::Nodes(ns) => ns.clone(),
        }
    }
}

/// Where one matrix entry came from.
#[derive(Debug, Clone)]
pub struct EntryProvenance {
    /// Optimal (or shared) frame angles per involved qubit.
    pub frame: Vec<(usize, [f64; 3])>,
    pub best_trial: usize,
    /// Zero when the entry was evaluated at the shared frame without
    /// optimization.
    pub trials_run: usize,
    pub clamped: bool,
}

/// A labeled correlation matrix plus per-entry provenance (row-major).
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub kind: MatrixKind,
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
    pub provenance: Vec<EntryProvenance>,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn provenance(&self, i: usize, j: usize) -> &EntryProvenance {
        &self.provenance[i * self.n() + j]
    }
}

/// Options for assembling one matrix.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub settings: OptimizerSettings,
    /// Evaluate every entry at the zero-angle frame instead of optimizing.
    pub shared_frame: bool,
    pub mitigation: Mitigation,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            settings: OptimizerSettings::default(),
            shared_frame: false,
            mitigation: Mitigation::None,
        }
    }
}

/// Builds one correlation matrix of `kind` over `scope` from the global
/// state. Entries are independent optimizations (or shared-frame
/// evaluations) and are computed in parallel when the `parallel` feature is
/// on; results do not depend on scheduling.
pub fn build_matrix(
    rho: &DensityMatrix,
    scope: &MatrixScope,
    kind: MatrixKind,
    opts: &BuildOptions,
) -> Result<CorrelationMatrix> {
    let groups = scope.groups();
    if groups.is_empty() {
        return Err(Error::invalid("empty matrix scope".to_string()));
    }
    if kind.nodewise() != matches!(scope, MatrixScope::Nodes(_)) {
        return Err(Error::invalid(format!(
            "{kind:?} does not apply to this scope"
        )));
    }
    for (i, (_, a)) in groups.iter().enumerate() {
        if a.is_empty() {
            return Err(Error::invalid("empty qubit group".to_string()));
        }
        for (_, b) in groups.iter().skip(i + 1) {
            if a.iter().any(|q| b.contains(q)) {
                return Err(Error::invalid("matrix groups overlap".to_string()));
            }
        }
    }
    if !opts.mitigation.supports_optimization() && !opts.shared_frame {
        return Err(Error::invalid(
            "this mitigation pipeline is shared-frame only".to_string(),
        ));
    }

    let n = groups.len();
    let pairs: Vec<(usize, usize)> = if kind.symmetric() {
        (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .collect()
    } else {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect()
    };

    let computed: Vec<Result<(usize, usize, f64, EntryProvenance)>> =
        exec::map_collect(pairs, |(i, j)| {
            let (value, prov) = compute_entry(rho, &groups, i, j, kind, opts)?;
            Ok((i, j, value, prov))
        });

    let mut values = DMatrix::zeros(n, n);
    let zero_prov = EntryProvenance {
        frame: Vec::new(),
        best_trial: 0,
        trials_run: 0,
        clamped: false,
    };
    let mut provenance = vec![zero_prov; n * n];
    for item in computed {
        let (i, j, value, prov) = item?;
        values[(i, j)] = value;
        provenance[i * n + j] = prov.clone();
        if kind.symmetric() && i != j {
            values[(j, i)] = value;
            provenance[j * n + i] = prov;
        }
    }
    Ok(CorrelationMatrix {
        kind,
        labels: groups.into_iter().map(|(l, _)| l).collect(),
        values,
        provenance,
    })
}

fn compute_entry(
    rho: &DensityMatrix,
    groups: &[(String, Vec<usize>)],
    i: usize,
    j: usize,
    kind: MatrixKind,
    opts: &BuildOptions,
) -> Result<(f64, EntryProvenance)> {
    let empty: Vec<usize> = Vec::new();
    let (ckind, a, b) = if i == j {
        (kind.diag_kind(), &groups[i].1, &empty)
    } else {
        (kind.offdiag_kind(), &groups[i].1, &groups[j].1)
    };
    let model = CostModel::new(rho, ckind, a, b, opts.mitigation.clone())?;
    let cfg = opts.settings.resolve(ckind);
    let entry = (i as u64, j as u64);

    let (mut value, prov) = if opts.shared_frame {
        let rounds = model.kind().rounds().len();
        let spr = shots_per_round(&cfg, rounds);
        // sampling-based pipelines need stream tags even under an exact shot
        // plan; the shot count itself is ignored by snapshot estimators
        let plan = match (spr, &opts.mitigation) {
            (None, Mitigation::Sd { .. }) => make_plan(Some(0), cfg.seed, entry, 0, 0, 0),
            (None, _) => SamplingPlan::Exact,
            (Some(s), _) => make_plan(Some(s), cfg.seed, entry, 0, 0, 0),
        };
        let thetas = vec![0.0; model.param_count()];
        let dists = model.distributions(&thetas, &plan)?;
        let clamped = dists
            .iter()
            .flat_map(|d| d.probs())
            .any(|&p| p > 0.0 && p <= crate::LOG_CLAMP);
        let value = model.quantity(&dists)?;
        let frame = model.qubits().into_iter().map(|q| (q, [0.0; 3])).collect();
        (
            value,
            EntryProvenance {
                frame,
                best_trial: 0,
                trials_run: 0,
                clamped,
            },
        )
    } else {
        let result = optimize_entry(&model, &cfg, entry)?;
        (
            result.value,
            EntryProvenance {
                frame: result.angles,
                best_trial: result.best_trial,
                trials_run: result.trials_run,
                clamped: result.clamped,
            },
        )
    };
    if i == j {
        value += kind.diag_offset(groups[i].1.len());
    }
    Ok((value, prov))
}

/// Frobenius distance between two matrices of identical shape.
pub fn matrix_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::dimension(format!(
            "matrix shapes {}x{} and {}x{} differ",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok((a - b).norm())
}
