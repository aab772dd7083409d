use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use torus_needlets::bench::replication_rng;
use torus_needlets::estimation::empirical_coefficients;
use torus_needlets::transform::{synthesize_direct, uniform_grid};
use torus_needlets::{
    analyze, build_frame, par, run_experiment, wrapped_normal, AnalysisOptions, ExperimentConfig, MultiIndex,
};

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn run<R>(parallel: bool, f: impl FnOnce() -> R) -> R {
    if parallel {
        f()
    } else {
        par::sequential(f)
    }
}

fn empirical(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_coefficients");
    let frame = build_frame(2.0, 2, 3).unwrap();
    let density = wrapped_normal(1.0, 20).unwrap();
    let samples = torus_needlets::product_density(vec![density.clone(), density])
        .unwrap()
        .sample(&mut replication_rng(1, 0), 20_000)
        .unwrap();
    let order = MultiIndex::new(vec![1, 0]);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::new(name, "d=2,n=20000,J=3"), |b| {
            b.iter(|| {
                run(parallel, || {
                    empirical_coefficients(&frame, black_box(&samples), 3, &order).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn analysis_and_synthesis(c: &mut Criterion) {
    let mut group = c.benchmark_group("transforms");
    group.sample_size(20);
    let frame = build_frame(2.0, 1, 5).unwrap();
    let density = wrapped_normal(0.3, 20).unwrap();
    let pdf = |t: &[f64]| density.pdf(t);
    let order = MultiIndex::zero(1);
    let coeffs = analyze(&frame, &pdf, &order, 5, AnalysisOptions::default()).unwrap();
    let points = uniform_grid(1024, 1);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::new(name, "analyze d=1,J=5"), |b| {
            b.iter(|| {
                run(parallel, || {
                    analyze(&frame, &pdf, &order, 5, AnalysisOptions::default()).unwrap()
                })
            })
        });
        group.bench_function(BenchmarkId::new(name, "direct synthesis 1024 points"), |b| {
            b.iter(|| {
                run(parallel, || {
                    synthesize_direct(&frame, black_box(&coeffs), &points).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    let config = ExperimentConfig::from_json_str(
        r#"{"density": "wrapped_normal(1.0)", "d": 1, "B": 2, "m": [1], "n": 8000, "replications": 32,
            "kappa0": [0.5, 1, 2.5, 5], "rules": ["hard", "soft"], "J": "auto", "grid": 512, "p": [1, 2, "inf"],
            "seed": 1, "risk_method": "both", "literal_paper_kappa": false}"#,
    )
    .unwrap();
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::new(name, "32 replications"), |b| {
            b.iter(|| run(parallel, || run_experiment(black_box(&config)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, empirical, analysis_and_synthesis, experiment);
criterion_main!(benches);
