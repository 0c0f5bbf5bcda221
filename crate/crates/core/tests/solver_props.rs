mod common;

use common::*;
use proptest::prelude::*;
use reflexnav_core::model::{orth_residuals, Dims, Hyperparams, ModelWeights};
use reflexnav_core::solver::{compute_reweights, solve, surrogate_pairs, SolverConfig};
use reflexnav_core::tensor::fro_norm;
use reflexnav_core::Matrix;

fn majorization_sides(a: &Matrix, b: &Matrix) -> (f64, f64) {
    let (na, nb) = (fro_norm(a), fro_norm(b));
    (nb - nb * nb / (2.0 * na), na - na * na / (2.0 * na))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn majorization_inequality(
        rows in 1usize..5, cols in 1usize..5,
        seed_a in prop::collection::vec(-3.0f64..3.0, 16),
        seed_b in prop::collection::vec(-3.0f64..3.0, 16),
    ) {
        let a = Matrix::from_vec(rows, cols, seed_a[..rows * cols].to_vec()).unwrap();
        let b = Matrix::from_vec(rows, cols, seed_b[..rows * cols].to_vec()).unwrap();
        prop_assume!(fro_norm(&a) > 0.0);
        let (lhs, rhs) = majorization_sides(&a, &b);
        prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
        let (eq_l, eq_r) = majorization_sides(&a, &a);
        prop_assert!((eq_l - eq_r).abs() <= 1e-12);
    }
}

fn instance(seed: u64) -> (reflexnav_core::Dataset, Hyperparams) {
    let dims = Dims { l: 3, d: 6, b: 2, c: 3 };
    let ds = random_dataset(dims, 40, vec![2, 4], 1.0, seed);
    let h = Hyperparams {
        history_len: 3,
        ..Default::default()
    };
    (ds, h)
}

#[test]
fn trace_is_monotone_and_converges() {
    for seed in 0..3 {
        let (ds, h) = instance(seed);
        let (_, rep) = solve(&ds, &h, &SolverConfig::default()).unwrap();
        assert!(rep.converged, "seed {seed}");
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn swapped_lambda_setting_also_monotone() {
    let (ds, mut h) = instance(11);
    h.lambda1 = 0.1;
    h.lambda2 = 1.0;
    let (_, rep) = solve(&ds, &h, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    for w in rep.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
}

#[test]
fn solve_is_deterministic() {
    let (ds, h) = instance(4);
    let cfg = SolverConfig {
        max_outer_iters: 20,
        seed: 9,
        ..Default::default()
    };
    let (w1, r1) = solve(&ds, &h, &cfg).unwrap();
    let (w2, r2) = solve(&ds, &h, &cfg).unwrap();
    assert_eq!(w1, w2);
    assert_eq!(r1.objective_trace, r2.objective_trace);
    assert_eq!(r1.records, r2.records);
}

#[test]
fn larger_multipliers_tighten_orthogonality() {
    let (ds, h) = instance(5);
    let h = h.with_multipliers(1.0);
    let cfg = SolverConfig::default();
    let (w1, _) = solve(&ds, &h, &cfg).unwrap();
    let (w10, _) = solve(&ds, &h.clone().with_multipliers(10.0), &cfg).unwrap();
    let (r1, r10) = (orth_residuals(&w1.w), orth_residuals(&w10.w));
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    assert!(sum(&r10.height) <= sum(&r1.height) + 1e-6, "{:?} vs {:?}", r10.height, r1.height);
    for (a, b) in r10.height.iter().zip(&r1.height) {
        assert!(a <= &(b + 1e-6), "{a} > {b}");
    }
}

#[test]
fn surrogates_touch_after_solving() {
    let (ds, h) = instance(6);
    let cfg = SolverConfig {
        max_outer_iters: 15,
        ..Default::default()
    };
    let (w, _) = solve(&ds, &h, &cfg).unwrap();
    for m in [w, ModelWeights::random_uniform(ds.dims(), 1.0, 3)] {
        let rw = compute_reweights(&m, &ds.layout, h.epsilon).unwrap();
        for &(n, s) in surrogate_pairs(&m, &ds.layout, &rw).unwrap().all() {
            assert!((n - s).abs() <= 1e-10, "{n} vs {s}");
        }
    }
}

#[test]
fn mismatched_history_len_is_rejected() {
    let (ds, mut h) = instance(1);
    h.history_len = 5;
    assert!(solve(&ds, &h, &SolverConfig::default()).is_err());
}
