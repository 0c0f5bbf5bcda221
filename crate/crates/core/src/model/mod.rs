//! The learnable model: three weight tensors, their predictions, the
//! regularizers, and the penalized objective the solver minimizes.
//!
//! Shapes (with `l` terrain types, `d` feature dims, `b` behavior channels
//! and `c` history steps):
//!
//! | tensor | shape      | role                                   |
//! |--------|------------|----------------------------------------|
//! | `w`    | `l × d × c`| features → terrain scores              |
//! | `v`    | `b × d × c`| terrain-projected features → behaviors |
//! | `u`    | `b × b × c`| past behavior differences → offset     |

mod assemble;
mod checkpoint;
mod importance;
pub(crate) mod norms;
mod objective;
mod predict;

pub use assemble::{assemble_instances, TrajectoryStep};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use importance::{importance_report, ImportanceReport};
pub use norms::{
    history_slice_norms,
    behavior_group_norms, behavior_norm, history_norm, orth_penalty, orth_residuals,
    OrthResiduals,
};
pub use objective::{gradient, objective, smooth_gradient, ObjectiveBreakdown};
pub(crate) use objective::{
    breakdown_prepared, check_shapes, eval_offset, eval_terrain_behavior, eval_v_block, projected_features,
    Prepared,
};
pub use predict::{predict_behavior, predict_offset, predict_terrain};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{Matrix, Tensor3};

/// How the `d` feature rows split into sensing modalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub modality_dims: Vec<usize>,
    pub modality_names: Vec<String>,
}

impl FeatureLayout {
    pub fn new(modality_dims: Vec<usize>, modality_names: Vec<String>) -> Result<Self> {
        let layout = Self {
            modality_dims,
            modality_names,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Layout with generated names `m0`, `m1`, ...
    pub fn unnamed(modality_dims: Vec<usize>) -> Result<Self> {
        let names = (0..modality_dims.len()).map(|i| format!("m{i}")).collect();
        Self::new(modality_dims, names)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modality_dims.is_empty() {
            return Err(invalid("layout.modality_dims", "need at least one modality"));
        }
        if let Some(i) = self.modality_dims.iter().position(|&d| d == 0) {
            return Err(invalid("layout.modality_dims", format!("modality {i} has zero width")));
        }
        if self.modality_names.len() != self.modality_dims.len() {
            return Err(invalid(
                "layout.modality_names",
                format!(
                    "{} names for {} modalities",
                    self.modality_names.len(),
                    self.modality_dims.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn num_modalities(&self) -> usize {
        self.modality_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.modality_dims.iter().sum()
    }

    /// Feature-row range `[start, end)` of modality `g`.
    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        let start: usize = self.modality_dims[..g].iter().sum();
        start..start + self.modality_dims[g]
    }

    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        (0..self.num_modalities()).map(|g| self.range(g)).collect()
    }
}

/// Regularization weights, Lagrange multipliers and the reweighting guard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    /// Behavior-norm weight.
    pub lambda1: f64,
    /// History-norm weight.
    pub lambda2: f64,
    /// Multiplier on the height-slice orthogonality residuals.
    pub lambda_l: f64,
    /// Multiplier on the width-slice orthogonality residuals.
    pub lambda_d: f64,
    /// Multiplier on the depth-slice orthogonality residuals.
    pub lambda_c: f64,
    pub epsilon: f64,
    pub history_len: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.1,
            lambda_l: 10.0,
            lambda_d: 10.0,
            lambda_c: 10.0,
            epsilon: 1e-8,
            history_len: 5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_l", self.lambda_l),
            ("lambda_d", self.lambda_d),
            ("lambda_c", self.lambda_c),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(invalid(
                "epsilon",
                format!("must lie in (0, 1e-3], got {}", self.epsilon),
            ));
        }
        if self.history_len == 0 {
            return Err(invalid("history_len", "must be >= 1"));
        }
        Ok(())
    }

    /// Same hyperparameters with all three Lagrange multipliers set to `m`.
    pub fn with_multipliers(mut self, m: f64) -> Self {
        self.lambda_l = m;
        self.lambda_d = m;
        self.lambda_c = m;
        self
    }
}

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub l: usize,
    pub d: usize,
    pub b: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub w: Tensor3,
    pub v: Tensor3,
    pub u: Tensor3,
}

impl ModelWeights {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            w: Tensor3::zeros(dims.l, dims.d, dims.c),
            v: Tensor3::zeros(dims.b, dims.d, dims.c),
            u: Tensor3::zeros(dims.b, dims.b, dims.c),
        }
    }

    /// Entries i.i.d. uniform in `[-scale, scale]`, drawn in `w`, `v`, `u` order.
    pub fn random_uniform(dims: Dims, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(dims);
        for t in [&mut m.w, &mut m.v, &mut m.u] {
            for x in t.data.iter_mut() {
                *x = rng.gen_range(-scale..=scale);
            }
        }
        m
    }

    pub fn dims(&self) -> Dims {
        Dims {
            l: self.w.height,
            d: self.w.width,
            b: self.v.height,
            c: self.w.depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.w.validate()?;
        self.v.validate()?;
        self.u.validate()?;
        let Dims { l: _, d, b, c } = self.dims();
        if self.v.width != d || self.v.depth != c {
            return Err(Error::Dimension(format!(
                "v is {:?}, expected b x {d} x {c}",
                self.v.shape()
            )));
        }
        if self.u.shape() != [b, b, c] {
            return Err(Error::Dimension(format!(
                "u is {:?}, expected {b} x {b} x {c}",
                self.u.shape()
            )));
        }
        if !(self.w.is_finite() && self.v.is_finite() && self.u.is_finite()) {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.v.is_finite() && self.u.is_finite()
    }
}

/// Training bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// `d × n × c`
    pub features: Tensor3,
    /// `l × n`, one-hot columns.
    pub terrain_labels: Matrix,
    /// `b × n`
    pub expected: Matrix,
    /// `b × n`
    pub actual: Matrix,
    /// `b × n × c`, `actual − expected` at each lag.
    pub behavior_diffs: Tensor3,
    pub layout: FeatureLayout,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> Dims {
        Dims {
            l: self.terrain_labels.rows,
            d: self.features.height,
            b: self.expected.rows,
            c: self.features.depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.behavior_diffs.validate()?;
        self.layout.validate()?;
        let Dims { l, d, b, c } = self.dims();
        let n = self.len();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Dimension(format!("dataset: {what}")))
            }
        };
        check(self.layout.total_dim() == d, "layout width differs from feature dim")?;
        check(
            self.terrain_labels.cols == n && self.terrain_labels.data.len() == l * n,
            "terrain labels are not l x n",
        )?;
        check(
            self.expected.cols == n && self.expected.data.len() == b * n,
            "expected is not b x n",
        )?;
        check(
            self.actual.rows == b && self.actual.cols == n && self.actual.data.len() == b * n,
            "actual is not b x n",
        )?;
        check(
            self.behavior_diffs.shape() == [b, n, c],
            "behavior diffs are not b x n x c",
        )?;
        for s in 0..n {
            let mut ones = 0;
            for i in 0..l {
                let z = self.terrain_labels.get(i, s);
                if z == 1.0 {
                    ones += 1;
                } else if z != 0.0 {
                    return Err(invalid("terrain_labels", format!("entry ({i},{s}) = {z} is not 0/1")));
                }
            }
            if ones != 1 {
                return Err(invalid(
                    "terrain_labels",
                    format!("column {s} has {ones} ones, expected exactly one"),
                ));
            }
        }
        Ok(())
    }

    /// Feature matrix `X_s` (`d × c`) of instance `s`.
    pub fn instance_features(&self, s: usize) -> Matrix {
        self.features.unstack(crate::tensor::Axis::Width, s).expect("instance index")
    }

    /// Behavior-difference matrix `E_s` (`b × c`) of instance `s`.
    pub fn instance_diffs(&self, s: usize) -> Matrix {
        self.behavior_diffs
            .unstack(crate::tensor::Axis::Width, s)
            .expect("instance index")
    }

    /// Terrain class of instance `s`.
    pub fn label(&self, s: usize) -> usize {
        (0..self.terrain_labels.rows)
            .find(|&i| self.terrain_labels.get(i, s) == 1.0)
            .unwrap_or(0)
    }

    /// Keeps the instances whose indices are listed, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let Dims { d, b, c, .. } = self.dims();
        let n = idx.len();
        let pick_cols = |m: &Matrix| Matrix::from_fn(m.rows, n, |r, s| m.get(r, idx[s]));
        Dataset {
            features: Tensor3::from_fn(d, n, c, |j, s, k| self.features.get(j, idx[s], k)),
            terrain_labels: pick_cols(&self.terrain_labels),
            expected: pick_cols(&self.expected),
            actual: pick_cols(&self.actual),
            behavior_diffs: Tensor3::from_fn(b, n, c, |j, s, k| self.behavior_diffs.get(j, idx[s], k)),
            layout: self.layout.clone(),
        }
    }

    /// Concatenates instances of datasets sharing a layout and dims.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let Some(first) = parts.first() else {
            return Err(Error::Dimension("cannot concatenate zero datasets".into()));
        };
        let dims = first.dims();
        if parts.iter().any(|p| p.dims() != dims || p.layout != first.layout) {
            return Err(Error::Dimension("datasets differ in dims or layout".into()));
        }
        let n: usize = parts.iter().map(Dataset::len).sum();
        let Dims { l, d, b, c } = dims;
        let mut out = Dataset {
            features: Tensor3::zeros(d, n, c),
            terrain_labels: Matrix::zeros(l, n),
            expected: Matrix::zeros(b, n),
            actual: Matrix::zeros(b, n),
            behavior_diffs: Tensor3::zeros(b, n, c),
            layout: first.layout.clone(),
        };
        let mut off = 0;
        for p in parts {
            for s in 0..p.len() {
                let t = off + s;
                for j in 0..d {
                    for k in 0..c {
                        out.features.set(j, t, k, p.features.get(j, s, k));
                    }
                }
                for i in 0..l {
                    out.terrain_labels.set(i, t, p.terrain_labels.get(i, s));
                }
                for r in 0..b {
                    out.expected.set(r, t, p.expected.get(r, s));
                    out.actual.set(r, t, p.actual.get(r, s));
                    for k in 0..c {
                        out.behavior_diffs.set(r, t, k, p.behavior_diffs.get(r, s, k));
                    }
                }
            }
            off += p.len();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_ranges() {
        let l = FeatureLayout::unnamed(vec![2, 3, 1]).unwrap();
        assert_eq!(l.ranges(), vec![0..2, 2..5, 5..6]);
        assert_eq!(l.total_dim(), 6);
        assert!(FeatureLayout::unnamed(vec![]).is_err());
        assert!(FeatureLayout::unnamed(vec![2, 0]).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let bad = Hyperparams {
            lambda1: -1.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Invalid { field, .. }) if field == "lambda1"));
        let bad = Hyperparams {
            epsilon: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_init_is_seeded_and_bounded() {
        let dims = Dims { l: 3, d: 4, b: 2, c: 2 };
        let a = ModelWeights::random_uniform(dims, 0.1, 7);
        let b = ModelWeights::random_uniform(dims, 0.1, 7);
        assert_eq!(a, b);
        assert!(a.w.data.iter().all(|v| v.abs() <= 0.1));
        assert_ne!(a, ModelWeights::random_uniform(dims, 0.1, 8));
    }
}
