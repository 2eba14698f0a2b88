//! Parallel speedup benchmarks: the same workloads on a one-worker pool and
//! on a pool sized to the machine. With the default `parallel` feature the
//! crate's entry and trial loops run on the ambient rayon pool, so the two
//! arms differ only in scheduling; built without the feature both arms run
//! the sequential fallback and should coincide.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qtopo_core::network::NetworkConfig;
use qtopo_core::optimize::{
    build_matrix, optimize_entry, BuildOptions, CostKind, CostModel, MatrixKind, MatrixScope,
    Mitigation, OptimizerSettings,
};
use qtopo_core::qstate::DensityMatrix;

/// Three-party network: one GHZ triple plus one EPR pair.
const FIVE_QUBIT: &str = r#"
[[sources]]
id = "g1"
kind = "ghz"
qubits = [1, 2, 3]

[[sources]]
id = "e1"
kind = "epr"
qubits = [4, 5]

[[nodes]]
id = "c1"
qubits = [1, 4]

[[nodes]]
id = "c2"
qubits = [2, 5]

[[nodes]]
id = "c3"
qubits = [3]
"#;

fn reference_state() -> (DensityMatrix, Vec<usize>) {
    let net = NetworkConfig::from_toml_str(FIVE_QUBIT)
        .expect("embedded config parses")
        .to_topology()
        .expect("embedded config is a valid network");
    let rho = net.assemble_global_state().expect("state assembles");
    (rho, net.qubit_ids())
}

fn thread_counts() -> Vec<usize> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores > 1 {
        vec![1, cores]
    } else {
        vec![1]
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("pool builds")
}

/// Full qubitwise uncertainty matrix with optimized entries; parallelism is
/// across the 25 matrix entries.
fn bench_matrix_build(c: &mut Criterion) {
    let (rho, qubits) = reference_state();
    let scope = MatrixScope::Qubits(qubits);
    let opts = BuildOptions {
        settings: OptimizerSettings {
            trials: 8,
            ..Default::default()
        },
        shared_frame: false,
        mitigation: Mitigation::None,
    };

    let mut group = c.benchmark_group("uncertainty-matrix");
    group
        .sample_size(10)
        .warm_up_time(Duration::from_secs(1))
        .measurement_time(Duration::from_secs(5));
    for threads in thread_counts() {
        let pool = pool(threads);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{threads}-threads")),
            &threads,
            |b, _| {
                b.iter(|| {
                    pool.install(|| {
                        build_matrix(&rho, &scope, MatrixKind::QubitwiseUncertainty, &opts)
                            .expect("build succeeds")
                    })
                })
            },
        );
    }
    group.finish();
}

/// One pair-uncertainty entry with many random restarts; parallelism is
/// across the 32 trials.
fn bench_entry_trials(c: &mut Criterion) {
    let (rho, _) = reference_state();
    let model = CostModel::new(
        &rho,
        CostKind::PairUncertainty,
        &[4],
        &[5],
        Mitigation::None,
    )
    .expect("model builds");
    let cfg = OptimizerSettings {
        trials: 32,
        ..Default::default()
    }
    .resolve(CostKind::PairUncertainty);

    let mut group = c.benchmark_group("entry-restarts");
    group
        .sample_size(10)
        .warm_up_time(Duration::from_secs(1))
        .measurement_time(Duration::from_secs(5));
    for threads in thread_counts() {
        let pool = pool(threads);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{threads}-threads")),
            &threads,
            |b, _| {
                b.iter(|| {
                    pool.install(|| {
                        optimize_entry(&model, &cfg, (0, 0)).expect("optimization succeeds")
                    })
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_matrix_build, bench_entry_trials);
criterion_main!(benches);
