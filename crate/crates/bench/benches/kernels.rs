use criterion::{black_box, criterion_group, criterion_main, Criterion};
use reflexnav_core::controller::{Controller, Limits};
use reflexnav_core::model::{gradient, objective, Dims, Hyperparams, ModelWeights};
use reflexnav_core::planted::{planted_dataset, planted_truth, PlantedSpec};
use reflexnav_core::sim::{run_trial, Setback, TrialConfig, World};
use reflexnav_core::solver::{solve, SolverConfig};
use reflexnav_core::tensor::contract;
use reflexnav_core::Matrix;

fn spec() -> PlantedSpec {
    PlantedSpec {
        l: 5,
        b: 2,
        c: 5,
        modality_dims: vec![5, 4, 2],
        irrelevant: vec![false, false, true],
        sigma: 0.01,
        latent_sd: 0.1,
    }
}

fn kernels(c: &mut Criterion) {
    let w = ModelWeights::random_uniform(Dims { l: 5, d: 11, b: 2, c: 5 }, 1.0, 1).w;
    let x = Matrix::from_fn(11, 5, |i, k| ((i * 5 + k) as f64).sin());
    c.bench_function("contract 5x11x5", |b| b.iter(|| contract(black_box(&w), black_box(&x)).unwrap()));

    let spec = spec();
    let truth = planted_truth(&spec, 1).unwrap();
    let ds = planted_dataset(&spec, &truth, 1000, 2).unwrap();
    let h = Hyperparams::default();
    let m = ModelWeights::random_uniform(ds.dims(), 0.1, 3);
    c.bench_function("objective n=1000", |b| b.iter(|| objective(black_box(&m), &ds, &h).unwrap()));
    c.bench_function("gradient n=1000", |b| b.iter(|| gradient(black_box(&m), &ds, &h).unwrap()));

    let small = planted_dataset(&spec, &truth, 200, 4).unwrap();
    let cfg = SolverConfig {
        max_outer_iters: 10,
        ..Default::default()
    };
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("solve n=200, 10 iterations", |b| b.iter(|| solve(&small, &h, &cfg).unwrap()));
    group.finish();
}

fn trial(c: &mut Criterion) {
    let world = World::default();
    let cat = &world.catalog;
    let track = reflexnav_core::sim::Track {
        segments: vec![cat.segment(0, 5.0, 0.0), cat.segment(2, 5.0, 10.0), cat.segment(3, 4.0, 0.0)],
    };
    let weights = ModelWeights::random_uniform(Dims { l: 5, d: 11, b: 2, c: 5 }, 0.1, 5);
    let mut controller = Controller::new(weights, Limits::default(), true).unwrap();
    let mut group = c.benchmark_group("closed loop");
    group.sample_size(20);
    group.bench_function("trial on a 14 m track", |b| {
        b.iter(|| run_trial(&track, &mut controller, &Setback::gain(0.6), &world, &TrialConfig { timeout: 60.0, seed: 1 }).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels, trial);
criterion_main!(benches);
