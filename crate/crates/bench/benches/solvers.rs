use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mid_core::data::gen_circle;
use mid_core::{fit, interpret, FitOptions, SolverConfig, SolverMethod};

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_order2");
    g.sample_size(10);
    for (n, d) in [(2_000, 4), (5_000, 6)] {
        let (ds, y) = gen_circle(n, d, 7).unwrap();
        for method in [SolverMethod::NullspaceSvd, SolverMethod::NormalCholesky, SolverMethod::Penalty] {
            let opts = FitOptions {
                order: 2,
                solver: SolverConfig::new(method),
                ..Default::default()
            };
            g.bench_with_input(BenchmarkId::new(method.to_string(), format!("n{n}_d{d}")), &opts, |b, o| {
                b.iter(|| fit(&ds, &y, o).unwrap())
            });
        }
    }
    g.finish();
}

fn queries(c: &mut Criterion) {
    let (ds, y) = gen_circle(2_000, 6, 11).unwrap();
    let model = fit(&ds, &y, &FitOptions::default()).unwrap();
    c.bench_function("predict_2000x6", |b| b.iter(|| model.predict(&ds).unwrap()));
    c.bench_function("shapley_2000x6", |b| b.iter(|| interpret::mid_shapley(&model, &ds).unwrap()));
}

criterion_group!(benches, solvers, queries);
criterion_main!(benches);
