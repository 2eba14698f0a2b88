//! Command-line schema and its resolution into a validated experiment plan.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qtopo_core::error::{Error, Result};
use qtopo_core::network::{NetworkConfig, NetworkTopology};
use qtopo_core::optimize::{CostKind, MatrixKind, Mitigation, OptimizerSettings, ShotPlan};
use qtopo_core::qstate::NoiseSpec;

#[derive(Debug, Parser)]
#[command(
    name = "qtopo",
    version,
    about = "Quantum network correlation matrices, topology inference, and error-mitigation comparisons"
)]
pub struct Cli {
    #[command(subcommand)]
    pub task: TaskArgs,
}

#[derive(Debug, Subcommand)]
pub enum TaskArgs {
    /// Build correlation matrices over a configured network
    BuildMatrices(BuildArgs),
    /// Reconstruct the source layout from qubitwise uncertainties
    Infer(InferArgs),
    /// Record optimizer convergence traces for one matrix entry
    OptimizeTraces(TracesArgs),
    /// Compare an unmitigated against a mitigated quantity across a noise grid
    QemCompare(CompareArgs),
    /// Sweep one quantity against noise strength
    SweepNoise(SweepArgs),
    /// Count the sources shared between node pairs
    Census(CensusArgs),
}

/// Flags shared by every task.
#[derive(Debug, Args)]
pub struct RunOpts {
    /// Shots per basis round; omit for exact statistics
    #[arg(long)]
    pub shots: Option<u64>,
    /// Master seed for every random stream
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random restarts per optimized entry
    #[arg(long)]
    pub trials: Option<usize>,
    /// Descent steps per restart
    #[arg(long)]
    pub steps: Option<usize>,
    /// Descent step size
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Error-mitigation pipeline
    #[arg(long, value_enum, default_value_t = QemChoice::None)]
    pub qem: QemChoice,
    /// Snapshot budget per evaluation for shadow distillation
    #[arg(long, default_value_t = 10_000)]
    pub snapshots: usize,
    /// Output directory (created if missing)
    #[arg(long, default_value = "qtopo-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Network description file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Matrix kinds to build
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [KindChoice::QubitwiseUncertainty, KindChoice::QubitwiseCharacteristic])]
    pub kinds: Vec<KindChoice>,
    /// Evaluate entries at the canonical shared frame instead of optimizing
    #[arg(long)]
    pub shared_frame: bool,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Network description file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Banding margin below the two-bit independence ceiling
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Group by one threshold instead of the EPR/GHZ bands
    #[arg(long)]
    pub coarse: bool,
    /// Explicit uncorrelated ceiling in bits (defaults to 2 - epsilon)
    #[arg(long)]
    pub ceiling: Option<f64>,
    /// Evaluate entries at the canonical shared frame instead of optimizing
    #[arg(long)]
    pub shared_frame: bool,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct TracesArgs {
    /// Network description file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Quantity to optimize
    #[arg(long, value_enum, default_value_t = CostChoice::PairUncertainty)]
    pub cost: CostChoice,
    /// Qubits the quantity acts on: one id, or two separated by a comma
    #[arg(long, value_delimiter = ',', required = true)]
    pub qubits: Vec<usize>,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Network description file (TOML); defaults to a single EPR pair
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Noise channel applied at each grid point
    #[arg(long, value_enum, default_value_t = ChannelChoice::Depolarizing)]
    pub channel: ChannelChoice,
    /// Grid: comma list ("0.1,0.2") or start:stop:count ("0.0:0.3:31")
    #[arg(long, default_value = "0.0:0.3:31")]
    pub gammas: String,
    /// Qubits the pair uncertainty acts on; defaults to the first two
    #[arg(long, value_delimiter = ',')]
    pub qubits: Vec<usize>,
    /// Qubits the channel hits; defaults to the measured pair
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<usize>,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Network description file (TOML); defaults to a single EPR pair
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Noise channel applied at each grid point
    #[arg(long, value_enum, default_value_t = ChannelChoice::PhaseDamping)]
    pub channel: ChannelChoice,
    /// Grid: comma list ("0.1,0.2") or start:stop:count ("0.0:0.9:10")
    #[arg(long, default_value = "0.0:0.9:10")]
    pub gammas: String,
    /// Quantity to evaluate
    #[arg(long, value_enum, default_value_t = QuantityChoice::PairUncertainty)]
    pub quantity: QuantityChoice,
    /// Qubits the quantity acts on; defaults to the first two
    #[arg(long, value_delimiter = ',')]
    pub qubits: Vec<usize>,
    /// Qubits the channel hits; defaults to the measured pair
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<usize>,
    /// Evaluate at the canonical shared frame instead of optimizing
    #[arg(long)]
    pub shared_frame: bool,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    /// Network description file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Ceil/floor counting that tolerates residual estimation noise
    #[arg(long)]
    pub hardened: bool,
    /// Optimize entry frames instead of the canonical shared frame
    #[arg(long)]
    pub optimize_frames: bool,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QemChoice {
    None,
    Pec,
    Vd,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindChoice {
    QubitwiseUncertainty,
    QubitwiseCharacteristic,
    Covariance,
    NodewiseUncertainty,
    NodewiseCharacteristic,
}

impl KindChoice {
    pub fn to_kind(self) -> MatrixKind {
        match self {
            KindChoice::QubitwiseUncertainty => MatrixKind::QubitwiseUncertainty,
            KindChoice::QubitwiseCharacteristic => MatrixKind::QubitwiseCharacteristic,
            KindChoice::Covariance => MatrixKind::Covariance,
            KindChoice::NodewiseUncertainty => MatrixKind::NodewiseUncertainty,
            KindChoice::NodewiseCharacteristic => MatrixKind::NodewiseCharacteristic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostChoice {
    PairUncertainty,
    SingleUncertainty,
    MutualInformation,
    Covariance,
    Variance,
}

impl CostChoice {
    pub fn to_kind(self) -> CostKind {
        match self {
            CostChoice::PairUncertainty => CostKind::PairUncertainty,
            CostChoice::SingleUncertainty => CostKind::SingleUncertainty,
            CostChoice::MutualInformation => CostKind::MutualInformation,
            CostChoice::Covariance => CostKind::Covariance,
            CostChoice::Variance => CostKind::Variance,
        }
    }

    pub fn is_pairwise(self) -> bool {
        matches!(
            self,
            CostChoice::PairUncertainty | CostChoice::MutualInformation | CostChoice::Covariance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelChoice {
    PhaseDamping,
    Depolarizing,
    WhiteNoise,
}

impl ChannelChoice {
    pub fn to_spec(self, gamma: f64) -> NoiseSpec {
        match self {
            ChannelChoice::PhaseDamping => NoiseSpec::PhaseDamping { gamma },
            ChannelChoice::Depolarizing => NoiseSpec::Depolarizing { gamma },
            ChannelChoice::WhiteNoise => NoiseSpec::WhiteNoise { p: 1.0 - gamma },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelChoice::PhaseDamping => "phase-damping",
            ChannelChoice::Depolarizing => "depolarizing",
            ChannelChoice::WhiteNoise => "white-noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantityChoice {
    PairUncertainty,
    MutualInformation,
    Covariance,
}

impl QuantityChoice {
    pub fn to_kind(self) -> CostKind {
        match self {
            QuantityChoice::PairUncertainty => CostKind::PairUncertainty,
            QuantityChoice::MutualInformation => CostKind::MutualInformation,
            QuantityChoice::Covariance => CostKind::Covariance,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantityChoice::PairUncertainty => "pair-uncertainty",
            QuantityChoice::MutualInformation => "mutual-information",
            QuantityChoice::Covariance => "covariance",
        }
    }
}

/// A fully resolved, validated run: the network, the task payload, and the
/// knobs every task shares.
#[derive(Debug)]
pub struct ExperimentSpec {
    /// Config path exactly as given (echoed into reports), if any.
    pub config_path: Option<String>,
    pub network: NetworkTopology,
    pub task: TaskSpec,
    pub settings: OptimizerSettings,
    pub qem: QemChoice,
    pub snapshots: usize,
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum TaskSpec {
    BuildMatrices {
        kinds: Vec<MatrixKind>,
        shared_frame: bool,
    },
    Infer {
        epsilon: f64,
        coarse: bool,
        ceiling: Option<f64>,
        shared_frame: bool,
    },
    OptimizeTraces {
        cost: CostKind,
        qubits: Vec<usize>,
    },
    QemCompare {
        channel: ChannelChoice,
        grid: Vec<f64>,
        pair: [usize; 2],
        targets: Vec<usize>,
    },
    SweepNoise {
        channel: ChannelChoice,
        grid: Vec<f64>,
        quantity: QuantityChoice,
        pair: [usize; 2],
        targets: Vec<usize>,
        shared_frame: bool,
    },
    Census {
        hardened: bool,
        shared_frame: bool,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::BuildMatrices { .. } => "build-matrices",
            TaskSpec::Infer { .. } => "infer",
            TaskSpec::OptimizeTraces { .. } => "optimize-traces",
            TaskSpec::QemCompare { .. } => "qem-compare",
            TaskSpec::SweepNoise { .. } => "sweep-noise",
            TaskSpec::Census { .. } => "census",
        }
    }
}

fn load_network(path: &PathBuf) -> Result<NetworkTopology> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    NetworkConfig::from_toml_str(&text)?.to_topology()
}

/// The fallback network for the sweep tasks: one EPR pair, one node each.
fn builtin_epr() -> NetworkTopology {
    NetworkConfig::from_toml_str(
        r#"
[[sources]]
id = "e1"
kind = "epr"
qubits = [0, 1]

[[nodes]]
id = "a"
qubits = [0]

[[nodes]]
id = "b"
qubits = [1]
"#,
    )
    .expect("builtin config parses")
    .to_topology()
    .expect("builtin config is a valid network")
}

/// Parses "a,b,c" float lists or "start:stop:count" inclusive grids.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::config(format!("gamma grid '{text}': {msg}"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:count"));
        }
        let start: f64 = parts[0].parse().map_err(|_| bad("bad start"))?;
        let stop: f64 = parts[1].parse().map_err(|_| bad("bad stop"))?;
        let count: usize = parts[2].parse().map_err(|_| bad("bad count"))?;
        if count < 2 {
            return Err(bad("count must be at least 2"));
        }
        (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(bad("empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(values)
}

fn optimizer_settings(run: &RunOpts, keep_traces: bool) -> OptimizerSettings {
    OptimizerSettings {
        step_size: run.step_size,
        steps: run.steps,
        trials: run.trials.unwrap_or(OptimizerSettings::default().trials),
        shots: run.shots.map(ShotPlan::Shots).unwrap_or(ShotPlan::Exact),
        seed: run.seed,
        keep_traces,
        ..Default::default()
    }
}

/// Picks the measured pair: explicit ids, or the network's first two qubits.
fn resolve_pair(explicit: &[usize], net: &NetworkTopology) -> Result<[usize; 2]> {
    match explicit.len() {
        0 => {
            let ids = net.qubit_ids();
            if ids.len() < 2 {
                return Err(Error::config(
                    "network has fewer than two qubits".to_string(),
                ));
            }
            Ok([ids[0], ids[1]])
        }
        2 => {
            if explicit[0] == explicit[1] {
                return Err(Error::config("pair qubits must differ".to_string()));
            }
            Ok([explicit[0], explicit[1]])
        }
        n => Err(Error::config(format!("expected two qubit ids, got {n}"))),
    }
}

impl ExperimentSpec {
    pub fn resolve(cli: Cli) -> Result<ExperimentSpec> {
        let (run, keep_traces) = match &cli.task {
            TaskArgs::BuildMatrices(a) => (&a.run, false),
            TaskArgs::Infer(a) => (&a.run, false),
            TaskArgs::OptimizeTraces(a) => (&a.run, true),
            TaskArgs::QemCompare(a) => (&a.run, false),
            TaskArgs::SweepNoise(a) => (&a.run, false),
            TaskArgs::Census(a) => (&a.run, false),
        };
        let settings = optimizer_settings(run, keep_traces);
        let qem = run.qem;
        let snapshots = run.snapshots;
        if snapshots < 2 {
            return Err(Error::config(
                "shadow distillation needs at least two snapshots".to_string(),
            ));
        }
        let out = run.out.clone();

        let (config_path, network, task) = match cli.task {
            TaskArgs::BuildMatrices(a) => {
                let net = load_network(&a.config)?;
                let kinds: Vec<MatrixKind> = a.kinds.iter().map(|k| k.to_kind()).collect();
                if kinds.is_empty() {
                    return Err(Error::config("no matrix kinds requested".to_string()));
                }
                if qem == QemChoice::Sd && !a.shared_frame {
                    return Err(Error::config(
                        "shadow distillation is shared-frame only; pass --shared-frame"
                            .to_string(),
                    ));
                }
                (
                    Some(a.config.display().to_string()),
                    net,
                    TaskSpec::BuildMatrices {
                        kinds,
                        shared_frame: a.shared_frame,
                    },
                )
            }
            TaskArgs::Infer(a) => {
                let net = load_network(&a.config)?;
                if !(0.0..1.0).contains(&a.epsilon) {
                    return Err(Error::config(format!(
                        "epsilon {} outside [0, 1)",
                        a.epsilon
                    )));
                }
                if let Some(c) = a.ceiling {
                    if !(1.0..=2.0).contains(&c) {
                        return Err(Error::config(format!("ceiling {c} outside [1, 2]")));
                    }
                }
                if qem == QemChoice::Sd && !a.shared_frame {
                    return Err(Error::config(
                        "shadow distillation is shared-frame only; pass --shared-frame"
                            .to_string(),
                    ));
                }
                (
                    Some(a.config.display().to_string()),
                    net,
                    TaskSpec::Infer {
                        epsilon: a.epsilon,
                        coarse: a.coarse,
                        ceiling: a.ceiling,
                        shared_frame: a.shared_frame,
                    },
                )
            }
            TaskArgs::OptimizeTraces(a) => {
                let net = load_network(&a.config)?;
                let cost = a.cost.to_kind();
                let want = if a.cost.is_pairwise() { 2 } else { 1 };
                if a.qubits.len() != want {
                    return Err(Error::config(format!(
                        "{:?} acts on {want} qubit(s), got {}",
                        a.cost,
                        a.qubits.len()
                    )));
                }
                if qem == QemChoice::Sd {
                    return Err(Error::config(
                        "shadow distillation has no gradients to trace".to_string(),
                    ));
                }
                (
                    Some(a.config.display().to_string()),
                    net,
                    TaskSpec::OptimizeTraces {
                        cost,
                        qubits: a.qubits,
                    },
                )
            }
            TaskArgs::QemCompare(a) => {
                let net = match &a.config {
                    Some(p) => load_network(p)?,
                    None => builtin_epr(),
                };
                if qem == QemChoice::None {
                    return Err(Error::config(
                        "qem-compare needs a mitigation pipeline; pass --qem pec|vd|sd"
                            .to_string(),
                    ));
                }
                if qem == QemChoice::Pec && a.channel != ChannelChoice::PhaseDamping {
                    return Err(Error::config(
                        "probabilistic cancellation targets phase damping; use --channel phase-damping"
                            .to_string(),
                    ));
                }
                let grid = parse_grid(&a.gammas)?;
                let pair = resolve_pair(&a.qubits, &net)?;
                let targets = if a.targets.is_empty() {
                    pair.to_vec()
                } else {
                    a.targets.clone()
                };
                (
                    a.config.as_ref().map(|p| p.display().to_string()),
                    net,
                    TaskSpec::QemCompare {
                        channel: a.channel,
                        grid,
                        pair,
                        targets,
                    },
                )
            }
            TaskArgs::SweepNoise(a) => {
                let net = match &a.config {
                    Some(p) => load_network(p)?,
                    None => builtin_epr(),
                };
                if qem == QemChoice::Pec && a.channel != ChannelChoice::PhaseDamping {
                    return Err(Error::config(
                        "probabilistic cancellation targets phase damping; use --channel phase-damping"
                            .to_string(),
                    ));
                }
                if qem == QemChoice::Sd && !a.shared_frame {
                    return Err(Error::config(
                        "shadow distillation is shared-frame only; pass --shared-frame"
                            .to_string(),
                    ));
                }
                let grid = parse_grid(&a.gammas)?;
                let pair = resolve_pair(&a.qubits, &net)?;
                let targets = if a.targets.is_empty() {
                    pair.to_vec()
                } else {
                    a.targets.clone()
                };
                (
                    a.config.as_ref().map(|p| p.display().to_string()),
                    net,
                    TaskSpec::SweepNoise {
                        channel: a.channel,
                        grid,
                        quantity: a.quantity,
                        pair,
                        targets,
                        shared_frame: a.shared_frame,
                    },
                )
            }
            TaskArgs::Census(a) => {
                let net = load_network(&a.config)?;
                if net.nodes.len() < 2 {
                    return Err(Error::config(
                        "census needs at least two nodes".to_string(),
                    ));
                }
                if qem == QemChoice::Sd && a.optimize_frames {
                    return Err(Error::config(
                        "shadow distillation is shared-frame only; drop --optimize-frames"
                            .to_string(),
                    ));
                }
                (
                    Some(a.config.display().to_string()),
                    net,
                    TaskSpec::Census {
                        hardened: a.hardened,
                        shared_frame: !a.optimize_frames,
                    },
                )
            }
        };

        Ok(ExperimentSpec {
            config_path,
            network,
            task,
            settings,
            qem,
            snapshots,
            out,
        })
    }

    /// Lowers the mitigation choice for entries over `targets`. Cancellation
    /// rates come from the network's declared per-qubit phase damping.
    pub fn mitigation_for(&self, targets: &[usize]) -> Result<Mitigation> {
        match self.qem {
            QemChoice::None => Ok(Mitigation::None),
            QemChoice::Vd => Ok(Mitigation::Vd),
            QemChoice::Sd => Ok(Mitigation::Sd {
                snapshots: self.snapshots,
                pauli_route: false,
            }),
            QemChoice::Pec => {
                let mut gammas = BTreeMap::new();
                for &q in targets {
                    match self.network.noise.get(&q) {
                        Some(NoiseSpec::PhaseDamping { gamma }) => {
                            gammas.insert(q, *gamma);
                        }
                        Some(other) => {
                            return Err(Error::config(format!(
                                "qubit {q} carries {other:?}; probabilistic cancellation \
                                 handles phase damping only"
                            )));
                        }
                        None => {}
                    }
                }
                if gammas.is_empty() {
                    return Err(Error::config(
                        "no phase-damping noise declared on the measured qubits; \
                         nothing to cancel"
                            .to_string(),
                    ));
                }
                Ok(Mitigation::Pec { gammas })
            }
        }
    }
}
