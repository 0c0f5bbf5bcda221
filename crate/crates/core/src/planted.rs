//! Synthetic datasets generated from known weights, for recovery experiments.
//!
//! Each depth slice of the true `W` has orthonormal rows supported on the
//! informative feature columns. Informative features are `x_k = W_kᵀ s_k`
//! with latent `s_k = z / c + η_k`, where the `η_k` sum to zero over `k`,
//! so `Σ_k W_k x_k = z` holds exactly. Irrelevant modalities are unit
//! Gaussian noise that affects neither labels nor behaviors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Dataset, Dims, FeatureLayout, ModelWeights};
use crate::tensor::{Matrix, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub l: usize,
    pub b: usize,
    pub c: usize,
    pub modality_dims: Vec<usize>,
    /// One flag per modality; irrelevant modalities carry pure noise.
    pub irrelevant: Vec<bool>,
    /// SD of the behavior noise.
    pub sigma: f64,
    /// SD of the latent perturbations `η`.
    pub latent_sd: f64,
}

impl PlantedSpec {
    pub fn layout(&self) -> Result<FeatureLayout> {
        FeatureLayout::unnamed(self.modality_dims.clone())
    }

    fn informative_columns(&self) -> Result<Vec<usize>> {
        let layout = self.layout()?;
        if self.irrelevant.len() != layout.num_modalities() {
            return Err(invalid("irrelevant", "one flag per modality"));
        }
        let cols: Vec<usize> = layout
            .ranges()
            .into_iter()
            .zip(&self.irrelevant)
            .filter(|(_, &irr)| !irr)
            .flat_map(|(r, _)| r)
            .collect();
        if cols.len() < self.l {
            return Err(invalid("modality_dims", "informative features must number at least l"));
        }
        Ok(cols)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Ground-truth weights for `spec`.
pub fn planted_truth(spec: &PlantedSpec, seed: u64) -> Result<ModelWeights> {
    let cols = spec.informative_columns()?;
    let d: usize = spec.modality_dims.iter().sum();
    let dims = Dims {
        l: spec.l,
        d,
        b: spec.b,
        c: spec.c,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ModelWeights::zeros(dims);
    for k in 0..spec.c {
        // Gram-Schmidt on random rows over the informative columns
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.l);
        while rows.len() < spec.l {
            let mut r: Vec<f64> = cols.iter().map(|_| gaussian(&mut rng)).collect();
            for q in &rows {
                let p: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                rows.push(r.iter().map(|x| x / norm).collect());
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (&j, &x) in cols.iter().zip(row) {
                m.w.set(i, j, k, x);
            }
        }
        for r in 0..spec.b {
            for &j in &cols {
                m.v.set(r, j, k, gaussian(&mut rng));
            }
        }
        for r in 0..spec.b {
            for q in 0..spec.b {
                m.u.set(r, q, k, 0.3 * gaussian(&mut rng));
            }
        }
    }
    Ok(m)
}

/// Draws `n` instances from the planted model.
pub fn planted_dataset(spec: &PlantedSpec, truth: &ModelWeights, n: usize, seed: u64) -> Result<Dataset> {
    let cols = spec.informative_columns()?;
    let layout = spec.layout()?;
    let Dims { l, d, b, c } = truth.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Tensor3::zeros(d, n, c);
    let mut labels = Matrix::zeros(l, n);
    let mut diffs = Tensor3::zeros(b, n, c);
    let mut expected = Matrix::zeros(b, n);
    let mut actual = Matrix::zeros(b, n);
    let informative: Vec<bool> = (0..d).map(|j| cols.contains(&j)).collect();
    for s in 0..n {
        let class = rng.gen_range(0..l);
        labels.set(class, s, 1.0);
        let zeta: Vec<Vec<f64>> = (0..c)
            .map(|_| (0..l).map(|_| spec.latent_sd * gaussian(&mut rng)).collect())
            .collect();
        for k in 0..c {
            let latent: Vec<f64> = (0..l)
                .map(|i| {
                    let mean_zeta = (0..c).map(|kk| zeta[kk][i]).sum::<f64>() / c as f64;
                    let base = if i == class { 1.0 / c as f64 } else { 0.0 };
                    base + zeta[k][i] - mean_zeta
                })
                .collect();
            for (j, &informative) in informative.iter().enumerate() {
                let x = if informative {
                    (0..l).map(|i| truth.w.get(i, j, k) * latent[i]).sum()
                } else {
                    gaussian(&mut rng)
                };
                features.set(j, s, k, x);
            }
            for r in 0..b {
                diffs.set(r, s, k, gaussian(&mut rng));
            }
        }
        let ds_one = Matrix::from_fn(d, c, |j, k| features.get(j, s, k));
        let y = crate::model::predict_behavior(truth, &ds_one)?;
        let e = Matrix::from_fn(b, c, |r, k| diffs.get(r, s, k));
        let o = crate::model::predict_offset(truth, &e)?;
        for r in 0..b {
            let yr = y[r] + spec.sigma * gaussian(&mut rng);
            expected.set(r, s, yr);
            // offset residual U E + (a − y) is pure noise
            actual.set(r, s, yr - o[r] + spec.sigma * gaussian(&mut rng));
        }
    }
    Ok(Dataset {
        features,
        terrain_labels: labels,
        expected,
        actual,
        behavior_diffs: diffs,
        layout,
    })
}

/// Root-mean-square behavior prediction error of `weights` on `ds`.
pub fn behavior_rmse(weights: &ModelWeights, ds: &Dataset) -> Result<f64> {
    let mut sq = 0.0;
    for s in 0..ds.len() {
        let y = crate::model::predict_behavior(weights, &ds.instance_features(s))?;
        for (r, yr) in y.iter().enumerate() {
            sq += (yr - ds.expected.get(r, s)).powi(2);
        }
    }
    Ok((sq / (ds.len() * ds.expected.rows) as f64).sqrt())
}

/// Fraction of instances whose argmax terrain score matches the label.
pub fn terrain_accuracy(weights: &ModelWeights, ds: &Dataset) -> Result<f64> {
    let mut hits = 0;
    for s in 0..ds.len() {
        let z = crate::model::predict_terrain(weights, &ds.instance_features(s))?;
        let arg = z
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0;
        if arg == ds.label(s) {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}
