use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uqkit::bnn::{mc_predict_batch, Mlp, MlpConfig};
use uqkit::conformal::{calibrate, ScoreKind};
use uqkit::datasets::{iris, synth_classes, ClassesConfig};
use uqkit::forest::{train_forest, ForestConfig};
use uqkit::numerics::{Cholesky, Matrix, RandomStream};

fn spd(n: usize) -> Matrix {
    let mut rng = RandomStream::new(1, 0);
    let a = Matrix::new(
        2 * n,
        n,
        (0..2 * n * n).map(|_| rng.standard_normal()).collect(),
    )
    .unwrap();
    a.gram()
}

fn cholesky(c: &mut Criterion) {
    let mut group = c.benchmark_group("cholesky_solve");
    for n in [10, 50, 200] {
        let m = spd(n);
        let b = vec![1.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| {
                Cholesky::factor(black_box(&m))
                    .unwrap()
                    .solve_vec(&b)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn forest(c: &mut Criterion) {
    let flowers = iris();
    c.bench_function("forest_iris_100x2", |b| {
        b.iter(|| {
            train_forest(
                &flowers.features,
                flowers.labels().unwrap(),
                3,
                &ForestConfig::default(),
            )
            .unwrap()
        })
    });
    let ds = synth_classes(&ClassesConfig {
        n: 6400,
        n_classes: 7,
        n_features: 10,
        ..Default::default()
    })
    .unwrap();
    let mut group = c.benchmark_group("forest_synthetic_6400");
    group.sample_size(10);
    group.bench_function("100x2", |b| {
        b.iter(|| {
            train_forest(
                &ds.features,
                ds.labels().unwrap(),
                7,
                &ForestConfig::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}

fn mc_dropout(c: &mut Criterion) {
    let net = Mlp::init(vec![1, 100, 100, 100, 2], &mut RandomStream::new(0, 0)).unwrap();
    let x = Matrix::column(&(0..100).map(|i| -6.0 + 0.12 * i as f64).collect::<Vec<_>>()).unwrap();
    let cfg = MlpConfig::default();
    let mut group = c.benchmark_group("mc_predict");
    group.sample_size(20);
    group.bench_function("100_points_50_passes", |b| {
        b.iter(|| mc_predict_batch(&net, &x, &cfg).unwrap())
    });
    group.finish();
}

fn conformal(c: &mut Criterion) {
    let mut rng = RandomStream::new(2, 0);
    let scores: Vec<f64> = (0..100_000).map(|_| rng.standard_normal().abs()).collect();
    c.bench_function("calibrate_100k", |b| {
        b.iter(|| calibrate(black_box(&scores), 0.1, ScoreKind::Classification).unwrap())
    });
}

criterion_group!(benches, cholesky, forest, mc_dropout, conformal);
criterion_main!(benches);
