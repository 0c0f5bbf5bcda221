#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reflexnav_core::model::{Dataset, Dims, FeatureLayout, ModelWeights};
use reflexnav_core::{Matrix, Tensor3};

/// Dataset with uniform entries in `[-scale, scale]` and cyclic labels.
pub fn random_dataset(dims: Dims, n: usize, layout: Vec<usize>, scale: f64, seed: u64) -> Dataset {
    let Dims { l, d, b, c } = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |_: usize| rng.gen_range(-scale..=scale);
    Dataset {
        features: Tensor3::from_vec(d, n, c, (0..d * n * c).map(&mut r).collect()).unwrap(),
        expected: Matrix::from_vec(b, n, (0..b * n).map(&mut r).collect()).unwrap(),
        actual: Matrix::from_vec(b, n, (0..b * n).map(&mut r).collect()).unwrap(),
        behavior_diffs: Tensor3::from_vec(b, n, c, (0..b * n * c).map(&mut r).collect()).unwrap(),
        terrain_labels: Matrix::from_fn(l, n, |i, s| if (s * 7 + 3) % l == i { 1.0 } else { 0.0 }),
        layout: FeatureLayout::unnamed(layout).unwrap(),
    }
}

pub fn zero_data(ds: &Dataset) -> Dataset {
    let mut z = ds.clone();
    z.features.data.iter_mut().for_each(|x| *x = 0.0);
    z.expected.data.iter_mut().for_each(|x| *x = 0.0);
    z.actual.data.iter_mut().for_each(|x| *x = 0.0);
    z.behavior_diffs.data.iter_mut().for_each(|x| *x = 0.0);
    z
}

pub fn flat(m: &ModelWeights) -> Vec<f64> {
    m.w.data.iter().chain(&m.v.data).chain(&m.u.data).copied().collect()
}

pub fn unflat(like: &ModelWeights, x: &[f64]) -> ModelWeights {
    let mut m = like.clone();
    let (nw, nv) = (m.w.data.len(), m.v.data.len());
    m.w.data.copy_from_slice(&x[..nw]);
    m.v.data.copy_from_slice(&x[nw..nw + nv]);
    m.u.data.copy_from_slice(&x[nw + nv..]);
    m
}

/// Five-point central difference of `f` along every coordinate.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let at = |xp: &mut Vec<f64>, f: &mut dyn FnMut(&[f64]) -> f64, t: f64| {
                xp[i] = x[i] + t;
                let v = f(xp);
                xp[i] = x[i];
                v
            };
            let (p1, m1) = (at(&mut xp, &mut f, h), at(&mut xp, &mut f, -h));
            let (p2, m2) = (at(&mut xp, &mut f, 2.0 * h), at(&mut xp, &mut f, -2.0 * h));
            (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
        })
        .collect()
}
