mod common;

use common::*;
use proptest::prelude::*;
use reflexnav_core::model::{
    behavior_norm, history_norm, objective, orth_penalty, predict_behavior, predict_offset, predict_terrain, Dims,
    Hyperparams, ModelWeights,
};
use reflexnav_core::Dataset;

fn lc(x: f64) -> f64 {
    // independent form: log((e^x + e^-x)/2), fine for the moderate residuals here
    ((x.exp() + (-x).exp()) / 2.0).ln()
}

fn fro(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Straight-line evaluation of every objective term from explicit index loops.
fn oracle(m: &ModelWeights, ds: &Dataset, h: &Hyperparams) -> f64 {
    let Dims { l, d, b, c } = m.dims();
    let n = ds.len();
    let mut total = 0.0;
    for s in 0..n {
        for i in 0..l {
            let mut z = 0.0;
            for k in 0..c {
                for j in 0..d {
                    z += m.w.get(i, j, k) * ds.features.get(j, s, k);
                }
            }
            total += lc(z - ds.terrain_labels.get(i, s));
        }
        for r in 0..b {
            let mut y = 0.0;
            let mut o = 0.0;
            for k in 0..c {
                for j in 0..d {
                    for jp in 0..d {
                        for i in 0..l {
                            y += m.v.get(r, j, k) * m.w.get(i, j, k) * m.w.get(i, jp, k) * ds.features.get(jp, s, k);
                        }
                    }
                }
                for q in 0..b {
                    o += m.u.get(r, q, k) * ds.behavior_diffs.get(q, s, k);
                }
            }
            let (yy, aa) = (ds.expected.get(r, s), ds.actual.get(r, s));
            total += lc(y - yy);
            total += lc(o + aa - yy);
        }
    }
    // behavior norm
    for range in ds.layout.ranges() {
        for k in 0..c {
            let g: Vec<Vec<f64>> = (0..b)
                .map(|r| (0..l).map(|i| range.clone().map(|j| m.v.get(r, j, k) * m.w.get(i, j, k)).sum()).collect())
                .collect();
            total += h.lambda1 * fro(&g);
        }
    }
    for k in 0..c {
        let s: Vec<Vec<f64>> = (0..b).map(|r| (0..b).map(|q| m.u.get(r, q, k)).collect()).collect();
        total += h.lambda2 * fro(&s);
    }
    // orthogonality: height slices d x c, width slices l x c, depth slices l x d
    let resid = |rows: usize, inner: usize, at: &dyn Fn(usize, usize) -> f64| {
        let r: Vec<Vec<f64>> = (0..rows)
            .map(|a| {
                (0..rows)
                    .map(|bb| (0..inner).map(|t| at(a, t) * at(bb, t)).sum::<f64>() - if a == bb { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        fro(&r)
    };
    for i in 0..l {
        total += h.lambda_l * resid(d, c, &|j, k| m.w.get(i, j, k));
    }
    for j in 0..d {
        total += h.lambda_d * resid(l, c, &|i, k| m.w.get(i, j, k));
    }
    for k in 0..c {
        total += h.lambda_c * resid(l, d, &|i, j| m.w.get(i, j, k));
    }
    total
}

#[test]
fn objective_matches_straight_line_oracle() {
    let dims = Dims { l: 3, d: 5, b: 2, c: 2 };
    let h = Hyperparams {
        lambda1: 0.9,
        lambda2: 0.4,
        lambda_l: 2.0,
        lambda_d: 0.5,
        lambda_c: 3.0,
        history_len: 2,
        ..Default::default()
    };
    for seed in 0..5 {
        let ds = random_dataset(dims, 15, vec![3, 2], 1.0, seed);
        let m = ModelWeights::random_uniform(dims, 0.7, 50 + seed);
        let got = objective(&m, &ds, &h).unwrap().total;
        let want = oracle(&m, &ds, &h);
        assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn objective_decomposes_into_its_parts() {
    let dims = Dims { l: 2, d: 4, b: 2, c: 3 };
    let ds = random_dataset(dims, 20, vec![1, 3], 1.0, 9);
    let m = ModelWeights::random_uniform(dims, 0.5, 10);
    for h in [
        Hyperparams {
            history_len: 3,
            ..Default::default()
        },
        Hyperparams {
            lambda1: 0.1,
            lambda2: 1.0,
            history_len: 3,
            ..Default::default()
        },
    ] {
        let ob = objective(&m, &ds, &h).unwrap();
        let parts = ob.terrain_loss
            + ob.behavior_loss
            + ob.offset_loss
            + h.lambda1 * behavior_norm(&m, &ds.layout).unwrap()
            + h.lambda2 * history_norm(&m)
            + orth_penalty(&m, &h);
        assert!((ob.total - parts).abs() <= 1e-12 * ob.total.abs());
    }
}

fn weights_strategy(dims: Dims) -> impl Strategy<Value = ModelWeights> {
    let nw = dims.l * dims.d * dims.c;
    let nv = dims.b * dims.d * dims.c;
    let nu = dims.b * dims.b * dims.c;
    prop::collection::vec(-2.0f64..2.0, nw + nv + nu).prop_map(move |x| unflat(&ModelWeights::zeros(dims), &x))
}

const DIMS: Dims = Dims { l: 2, d: 3, b: 2, c: 2 };

proptest! {
    #[test]
    fn predictions_are_linear_in_their_weights(
        a in weights_strategy(DIMS), bw in weights_strategy(DIMS), alpha in -2.0f64..2.0, beta in -2.0f64..2.0,
        xs in prop::collection::vec(-1.0f64..1.0, 6), es in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let x = reflexnav_core::Matrix::from_vec(3, 2, xs).unwrap();
        let e = reflexnav_core::Matrix::from_vec(2, 2, es).unwrap();
        let combo = |p: &ModelWeights, q: &ModelWeights| unflat(p, &flat(p).iter().zip(flat(q)).map(|(s, t)| alpha * s + beta * t).collect::<Vec<_>>());
        let mix = combo(&a, &bw);
        let close = |u: &[f64], v: &[f64]| u.iter().zip(v).all(|(p, q)| (p - q).abs() <= 1e-10 * (1.0 + p.abs().max(q.abs())));

        let lin = |f: &dyn Fn(&ModelWeights) -> Vec<f64>| {
            let (fa, fb) = (f(&a), f(&bw));
            fa.iter().zip(&fb).map(|(p, q)| alpha * p + beta * q).collect::<Vec<_>>()
        };
        prop_assert!(close(&predict_terrain(&mix, &x).unwrap(), &lin(&|m| predict_terrain(m, &x).unwrap())));
        prop_assert!(close(&predict_offset(&mix, &e).unwrap(), &lin(&|m| predict_offset(m, &e).unwrap())));
        // behavior is linear in V with W held fixed
        let mut mv = a.clone();
        mv.v = mix.v.clone();
        let mut bv = bw.clone();
        bv.w = a.w.clone();
        let fa = predict_behavior(&a, &x).unwrap();
        let fb = predict_behavior(&bv, &x).unwrap();
        let want: Vec<f64> = fa.iter().zip(&fb).map(|(p, q)| alpha * p + beta * q).collect();
        prop_assert!(close(&predict_behavior(&mv, &x).unwrap(), &want));
    }

    #[test]
    fn terrain_argmax_is_scale_invariant(m in weights_strategy(DIMS), xs in prop::collection::vec(-1.0f64..1.0, 6), s in 0.01f64..100.0) {
        let x = reflexnav_core::Matrix::from_vec(3, 2, xs).unwrap();
        let argmax = |v: Vec<f64>| v.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &y)| if y > b.1 { (i, y) } else { b }).0;
        let mut scaled = m.clone();
        scaled.w = m.w.scale(s);
        prop_assert_eq!(argmax(predict_terrain(&m, &x).unwrap()), argmax(predict_terrain(&scaled, &x).unwrap()));
    }

    #[test]
    fn norms_are_absolutely_homogeneous(m in weights_strategy(DIMS), alpha in -3.0f64..3.0) {
        let layout = reflexnav_core::FeatureLayout::unnamed(vec![1, 2]).unwrap();
        let mut s = m.clone();
        s.v = m.v.scale(alpha);
        s.u = m.u.scale(alpha);
        let bn = behavior_norm(&m, &layout).unwrap();
        prop_assert!((behavior_norm(&s, &layout).unwrap() - alpha.abs() * bn).abs() <= 1e-12 * (1.0 + bn));
        let hn = history_norm(&m);
        prop_assert!((history_norm(&s) - alpha.abs() * hn).abs() <= 1e-12 * (1.0 + hn));
    }
}
