use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deadline_aoi::system::{sweep, SweepAxis};
use deadline_aoi::sim::simulate_with;
use deadline_aoi::{Execution, SimConfig, SystemParams};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn replications(c: &mut Criterion) {
    let cfg = SimConfig::new(SystemParams::reference(-5.0, 0.5, 0.5, 0.8, 3), 100_000, 1).with_replications(8);
    let mut g = c.benchmark_group("simulate_8x100k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_with(black_box(&cfg), exec).unwrap())
        });
    }
    g.finish();
}

fn analytical_sweep(c: &mut Criterion) {
    let base = SystemParams::reference(1.0, 0.5, 0.5, 0.5, 20);
    let values: Vec<f64> = (1..=200).map(|i| i as f64 / 200.0).collect();
    let mut g = c.benchmark_group("sweep_q2_200_points");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(black_box(&base), SweepAxis::Q2, &values, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, replications, analytical_sweep);
criterion_main!(benches);
