use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use resde::{
    coupled_pair, estimate_strong_error, make_stream, randomized_euler, run_optimizer, DriftSampling, EstimatorOptions,
    OptimizerKind, SchemeConfig,
};
use resde_bench::{problem, PROBLEMS, SIZES};

fn single_path(c: &mut Criterion) {
    let mut group = c.benchmark_group("randomized_euler");
    for name in PROBLEMS {
        let p = problem(name);
        for (n, m) in SIZES {
            group.throughput(Throughput::Elements((n * m) as u64));
            for sampling in [DriftSampling::Direct, DriftSampling::Auto] {
                let cfg = SchemeConfig::for_problem(&p, n, m).unwrap().with_sampling(sampling);
                let id = BenchmarkId::new(format!("{name}/{sampling:?}"), format!("{n}x{m}"));
                group.bench_with_input(id, &cfg, |b, cfg| {
                    let mut j = 0;
                    b.iter(|| {
                        j += 1;
                        black_box(randomized_euler(&p, cfg, &make_stream(1, j)).unwrap())
                    })
                });
            }
        }
    }
    group.finish();
}

fn coupled(c: &mut Criterion) {
    let p = problem("sin2d");
    let mut group = c.benchmark_group("coupled_pair");
    for ratio in [2, 10, 100] {
        let cfg = SchemeConfig::for_problem(&p, 50, 50).unwrap().with_sampling(DriftSampling::Auto);
        group.bench_with_input(BenchmarkId::from_parameter(ratio), &ratio, |b, &ratio| {
            let mut j = 0;
            b.iter(|| {
                j += 1;
                black_box(coupled_pair(&p, &cfg, ratio, &make_stream(1, j), false).unwrap())
            })
        });
    }
    group.finish();
}

fn estimator(c: &mut Criterion) {
    let p = problem("parabolic");
    let opts = EstimatorOptions {
        ratio: 10,
        replicates: 256,
        sampling: DriftSampling::Auto,
        ..Default::default()
    };
    let mut group = c.benchmark_group("estimate_strong_error");
    group.sample_size(10);
    group.bench_function("parabolic_50x50_K256", |b| {
        b.iter(|| black_box(estimate_strong_error(&p, 50, 50, &opts).unwrap()))
    });
    group.finish();
}

fn optimizers(c: &mut Criterion) {
    let p = problem("himmelblau_det");
    let s = make_stream(3, 0);
    let mut group = c.benchmark_group("optimizer_200_steps");
    for kind in OptimizerKind::comparison_set() {
        group.bench_function(kind.name(), |b| {
            b.iter(|| black_box(run_optimizer(&kind, &p, &[1.0, 1.0], 200, &s).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, single_path, coupled, estimator, optimizers);
criterion_main!(benches);
