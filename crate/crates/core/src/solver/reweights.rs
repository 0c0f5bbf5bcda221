//! Reweighting coefficients for the quadratic majorizers of every norm term.
//!
//! For a norm value `a > 0` at the current point, `q = 1 / (2a)` and
//! `‖B‖ ≤ q ‖B‖² + a/2 = q ‖B‖² + 1/(4q)` for every `B`, with equality at
//! `‖B‖ = a`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    behavior_group_norms, history_slice_norms, orth_residuals, FeatureLayout, ModelWeights,
};
use crate::tensor::Matrix;

/// `1 / (2 max(norm, ε))`.
pub fn reweight(norm: f64, epsilon: f64) -> f64 {
    1.0 / (2.0 * norm.max(epsilon))
}

/// Quadratic surrogate `q n² + 1/(4q)` of a norm value `n`.
pub fn surrogate(q: f64, n: f64) -> f64 {
    q * n * n + 0.25 / q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweights {
    /// Behavior groups, `m × c`, used by the `W` block.
    pub qb: Matrix,
    /// Height slices of `W`, length `l`.
    pub ql: Vec<f64>,
    /// Width slices of `W`, length `d`.
    pub qd: Vec<f64>,
    /// Depth slices of `W`, length `c`.
    pub qc: Vec<f64>,
    /// Behavior groups, `m × c`, used by the `V` block.
    pub ob: Matrix,
    /// History slices of `U`, length `c`.
    pub pr: Vec<f64>,
}

pub fn compute_reweights(weights: &ModelWeights, layout: &FeatureLayout, epsilon: f64) -> Result<Reweights> {
    let mut qb = behavior_group_norms(weights, layout)?;
    qb.data.iter_mut().for_each(|x| *x = reweight(*x, epsilon));
    let orth = orth_residuals(&weights.w);
    let rw = |v: &[f64]| v.iter().map(|&x| reweight(x, epsilon)).collect::<Vec<_>>();
    Ok(Reweights {
        ob: qb.clone(),
        qb,
        ql: rw(&orth.height),
        qd: rw(&orth.width),
        qc: rw(&orth.depth),
        pr: rw(&history_slice_norms(&weights.u)),
    })
}

/// Each norm term paired with its surrogate built from `rw`, for identity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePairs {
    pub behavior: Vec<(f64, f64)>,
    pub height: Vec<(f64, f64)>,
    pub width: Vec<(f64, f64)>,
    pub depth: Vec<(f64, f64)>,
    pub history: Vec<(f64, f64)>,
}

impl SurrogatePairs {
    pub fn all(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.behavior
            .iter()
            .chain(&self.height)
            .chain(&self.width)
            .chain(&self.depth)
            .chain(&self.history)
    }
}

/// Evaluates every norm term of `weights` and its surrogate under `rw`.
pub fn surrogate_pairs(weights: &ModelWeights, layout: &FeatureLayout, rw: &Reweights) -> Result<SurrogatePairs> {
    let groups = behavior_group_norms(weights, layout)?;
    let orth = orth_residuals(&weights.w);
    let pair = |q: &[f64], n: &[f64]| q.iter().zip(n).map(|(&q, &n)| (n, surrogate(q, n))).collect();
    Ok(SurrogatePairs {
        behavior: pair(&rw.qb.data, &groups.data),
        height: pair(&rw.ql, &orth.height),
        width: pair(&rw.qd, &orth.width),
        depth: pair(&rw.qc, &orth.depth),
        history: pair(&rw.pr, &history_slice_norms(&weights.u)),
    })
}
