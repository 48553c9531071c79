use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sublift_core::grid::LabelGrid;
use sublift_core::models::{assemble, DualMode, ModelSpec, RegularizerSpec};
use sublift_core::solver::{run, Execution, SolverConfig};

fn image(n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|p| {
            let (x, y) = ((p % n) as f64 / n as f64, (p / n) as f64 / n as f64);
            0.5 + 0.35 * (6.0 * x).sin() * (4.0 * y + 0.5).cos()
        })
        .collect()
}

fn bench_execution(c: &mut Criterion) {
    let mut group = c.benchmark_group("iterations");
    group.sample_size(10);
    for &n in &[32, 96] {
        let f = image(n);
        let spec = ModelSpec::quadratic_data(
            n,
            n,
            1,
            &f,
            1.0,
            LabelGrid::new(0.0, 1.0, 5).unwrap(),
            RegularizerSpec::mumford_shah(3.0, 0.1),
            DualMode::PiecewiseLinear,
        );
        let model = assemble(&spec).unwrap();
        for (name, execution) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            let config = SolverConfig {
                max_iters: 50,
                execution,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &model, |b, m| b.iter(|| run(m, &config).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, bench_execution);
criterion_main!(benches);
