use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fruler_bench::{friedman, FitnessFixture, SEED};
use fruler_core::evolution::Problem;
use fruler_core::{discretize_dataset, loo_1nn_mse, select_instances, sgd_elastic_net, Matrix, SgdConfig};
use std::hint::black_box;

fn selection(c: &mut Criterion) {
    let mut g = c.benchmark_group("selection");
    g.sample_size(10);
    for n in [300, 1200] {
        let d = friedman(n);
        let all: Vec<usize> = (0..n).collect();
        g.bench_with_input(BenchmarkId::new("loo_1nn", n), &d, |b, d| {
            b.iter(|| loo_1nn_mse(&all, &all, black_box(d)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("select_instances", n), &d, |b, d| {
            b.iter(|| select_instances(black_box(d)).unwrap())
        });
    }
    g.finish();
}

fn discretization(c: &mut Criterion) {
    let d = friedman(1200);
    c.bench_function("discretize_dataset/1200", |b| b.iter(|| discretize_dataset(black_box(&d))));
}

fn sgd(c: &mut Criterion) {
    let d = friedman(1000);
    let x = Matrix::from_rows(&d.x);
    let cfg = SgdConfig {
        lambda: 1e-4,
        alpha: 0.95,
        eta0: 0.01,
        seed: SEED,
    };
    c.bench_function("sgd_elastic_net/1000x5", |b| b.iter(|| sgd_elastic_net(&x, black_box(&d.y), &cfg).unwrap()));
}

fn fitness(c: &mut Criterion) {
    let f = FitnessFixture::new(1200);
    let problem = Problem {
        ladders: &f.ladders,
        selected_x: &f.selected.x,
        selected_y: &f.selected.y,
        train_x: &f.train.x,
        train_y: &f.train.y,
        sgd: f.sgd,
        fuzziness: 1.0,
    };
    let mut g = c.benchmark_group("fitness");
    g.sample_size(10);
    g.bench_function("initial_population_16", |b| {
        b.iter(|| f.chromosomes.iter().map(|ch| problem.fitness(black_box(ch))).sum::<f64>())
    });
    g.finish();
}

criterion_group!(benches, selection, discretization, sgd, fitness);
criterion_main!(benches);
