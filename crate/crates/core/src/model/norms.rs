//! Structured regularizers and orthogonality residuals.
//!
//! The `*_sq` helpers evaluate coefficient-weighted *squared* norms and
//! accumulate their gradients. With coefficient `1 / (2 max(‖·‖, ε))` they
//! are the quadratic majorizers the solver minimizes; at the current point
//! their gradient equals the gradient of the plain norm.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::tensor::{fro_norm, gram_residual_norm, Axis, Matrix, Tensor3};

use super::{FeatureLayout, Hyperparams, ModelWeights};

/// Composite block `G = V_g W_gᵀ` (`b × l`) for modality range `cols` at depth `k`.
fn group_product(v: &Tensor3, w: &Tensor3, cols: std::ops::Range<usize>, k: usize) -> Matrix {
    let (b, l) = (v.height, w.height);
    let mut g = Matrix::zeros(b, l);
    for r in 0..b {
        for i in 0..l {
            let mut s = 0.0;
            for j in cols.clone() {
                s += v.get(r, j, k) * w.get(i, j, k);
            }
            g.data[r * l + i] = s;
        }
    }
    g
}

fn check_layout(weights: &ModelWeights, layout: &FeatureLayout) -> Result<()> {
    if layout.total_dim() != weights.w.width || weights.v.width != weights.w.width {
        return dim_err(format!(
            "layout covers {} features, weights have {}",
            layout.total_dim(),
            weights.w.width
        ));
    }
    Ok(())
}

/// `‖V_g W_gᵀ‖_F` for every (modality, depth) group, as an `m × c` matrix.
pub fn behavior_group_norms(weights: &ModelWeights, layout: &FeatureLayout) -> Result<Matrix> {
    check_layout(weights, layout)?;
    let c = weights.w.depth;
    let ranges = layout.ranges();
    let mut out = Matrix::zeros(ranges.len(), c);
    for (g, range) in ranges.iter().enumerate() {
        for k in 0..c {
            let gp = group_product(&weights.v, &weights.w, range.clone(), k);
            out.set(g, k, fro_norm(&gp));
        }
    }
    Ok(out)
}

/// Sum of group norms over modalities and history steps.
pub fn behavior_norm(weights: &ModelWeights, layout: &FeatureLayout) -> Result<f64> {
    Ok(behavior_group_norms(weights, layout)?.data.iter().sum())
}

/// `‖U^(k)‖_F` per history step.
pub fn history_slice_norms(u: &Tensor3) -> Vec<f64> {
    (0..u.depth)
        .map(|k| fro_norm(&u.unstack(Axis::Depth, k).expect("depth index")))
        .collect()
}

/// `Σ_k ‖U^(k)‖_F`.
pub fn history_norm(weights: &ModelWeights) -> f64 {
    history_slice_norms(&weights.u).iter().sum()
}

/// Raw orthogonality residuals `‖M Mᵀ − I‖_F` of every slice of `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthResiduals {
    /// One per height slice `W^i` (`d × c`), identity of size `d`.
    pub height: Vec<f64>,
    /// One per width slice `W_j` (`l × c`), identity of size `l`.
    pub width: Vec<f64>,
    /// One per depth slice `W^(k)` (`l × d`), identity of size `l`.
    pub depth: Vec<f64>,
}

impl OrthResiduals {
    pub fn max(&self) -> f64 {
        self.height
            .iter()
            .chain(&self.width)
            .chain(&self.depth)
            .fold(0.0, |a, &b| a.max(b))
    }
}

pub fn orth_residuals(w: &Tensor3) -> OrthResiduals {
    let res = |axis: Axis| -> Vec<f64> {
        (0..w.axis_len(axis))
            .map(|i| gram_residual_norm(&w.unstack(axis, i).expect("slice index")))
            .collect()
    };
    OrthResiduals {
        height: res(Axis::Height),
        width: res(Axis::Width),
        depth: res(Axis::Depth),
    }
}

/// `λ_l Σ_i ‖W^i W^iᵀ − I‖ + λ_d Σ_j ‖W_j W_jᵀ − I‖ + λ_c Σ_k ‖W^(k) W^(k)ᵀ − I‖`.
pub fn orth_penalty(weights: &ModelWeights, hyper: &Hyperparams) -> f64 {
    let r = orth_residuals(&weights.w);
    hyper.lambda_l * r.height.iter().sum::<f64>()
        + hyper.lambda_d * r.width.iter().sum::<f64>()
        + hyper.lambda_c * r.depth.iter().sum::<f64>()
}

/// `scale · Σ_g coef_g ‖V_g W_gᵀ‖²`; accumulates gradients into `gw` / `gv` when given.
pub(crate) fn behavior_sq(
    weights: &ModelWeights,
    layout: &FeatureLayout,
    coef: &Matrix,
    scale: f64,
    mut gw: Option<&mut Tensor3>,
    mut gv: Option<&mut Tensor3>,
) -> f64 {
    let (w, v) = (&weights.w, &weights.v);
    let (b, l, c) = (v.height, w.height, w.depth);
    let mut total = 0.0;
    for (g, range) in layout.ranges().into_iter().enumerate() {
        for k in 0..c {
            let q = scale * coef.get(g, k);
            if q == 0.0 {
                continue;
            }
            let gp = group_product(v, w, range.clone(), k);
            total += q * gp.data.iter().map(|x| x * x).sum::<f64>();
            if let Some(gv) = gv.as_deref_mut() {
                for r in 0..b {
                    for j in range.clone() {
                        let s: f64 = (0..l).map(|i| gp.data[r * l + i] * w.get(i, j, k)).sum();
                        let idx = gv.index(r, j, k);
                        gv.data[idx] += 2.0 * q * s;
                    }
                }
            }
            if let Some(gw) = gw.as_deref_mut() {
                for i in 0..l {
                    for j in range.clone() {
                        let s: f64 = (0..b).map(|r| gp.data[r * l + i] * v.get(r, j, k)).sum();
                        let idx = gw.index(i, j, k);
                        gw.data[idx] += 2.0 * q * s;
                    }
                }
            }
        }
    }
    total
}

/// Weighted squared orthogonality residuals
/// `Σ_i a_i ‖R^i‖² + Σ_j b_j ‖R_j‖² + Σ_k c_k ‖R^(k)‖²` with gradient `4 a R M`.
pub(crate) fn orth_sq(
    w: &Tensor3,
    height_coef: &[f64],
    width_coef: &[f64],
    depth_coef: &[f64],
    mut gw: Option<&mut Tensor3>,
) -> f64 {
    let (l, d, c) = (w.height, w.width, w.depth);
    let mut total = 0.0;

    // Height slices: M[j][k] = w[i][j][k], R is d x d.
    for (i, &a) in height_coef.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let m = w.unstack(Axis::Height, i).expect("height index");
        let mut r = m.gram();
        for j in 0..d {
            r.data[j * d + j] -= 1.0;
        }
        total += a * r.data.iter().map(|x| x * x).sum::<f64>();
        if let Some(gw) = gw.as_deref_mut() {
            let rm = r.matmul(&m).expect("shapes");
            for j in 0..d {
                for k in 0..c {
                    let idx = gw.index(i, j, k);
                    gw.data[idx] += 4.0 * a * rm.get(j, k);
                }
            }
        }
    }
    // Width slices: M[i][k] = w[i][j][k], R is l x l.
    for (j, &a) in width_coef.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let m = w.unstack(Axis::Width, j).expect("width index");
        let mut r = m.gram();
        for i in 0..l {
            r.data[i * l + i] -= 1.0;
        }
        total += a * r.data.iter().map(|x| x * x).sum::<f64>();
        if let Some(gw) = gw.as_deref_mut() {
            let rm = r.matmul(&m).expect("shapes");
            for i in 0..l {
                for k in 0..c {
                    let idx = gw.index(i, j, k);
                    gw.data[idx] += 4.0 * a * rm.get(i, k);
                }
            }
        }
    }
    // Depth slices: M[i][j] = w[i][j][k], R is l x l.
    for (k, &a) in depth_coef.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let m = w.unstack(Axis::Depth, k).expect("depth index");
        let mut r = m.gram();
        for i in 0..l {
            r.data[i * l + i] -= 1.0;
        }
        total += a * r.data.iter().map(|x| x * x).sum::<f64>();
        if let Some(gw) = gw.as_deref_mut() {
            let rm = r.matmul(&m).expect("shapes");
            for i in 0..l {
                for j in 0..d {
                    let idx = gw.index(i, j, k);
                    gw.data[idx] += 4.0 * a * rm.get(i, j);
                }
            }
        }
    }
    total
}

/// `Σ_k coef_k ‖U^(k)‖²` with gradient `2 coef_k U^(k)`.
pub(crate) fn history_sq(u: &Tensor3, coef: &[f64], gu: Option<&mut Tensor3>) -> f64 {
    let (b, c) = (u.height, u.depth);
    let mut total = 0.0;
    for (k, &a) in coef.iter().enumerate().take(c) {
        for r in 0..b {
            for q in 0..b {
                let x = u.get(r, q, k);
                total += a * x * x;
            }
        }
    }
    if let Some(gu) = gu {
        for r in 0..b {
            for q in 0..b {
                for (k, &a) in coef.iter().enumerate().take(c) {
                    let idx = gu.index(r, q, k);
                    gu.data[idx] += 2.0 * a * u.get(r, q, k);
                }
            }
        }
    }
    total
}
