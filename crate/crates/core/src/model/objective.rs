//! Penalized objective and its gradient.
//!
//! ```text
//! F = Σ logcosh(Σ_k W^(k) x_k − z)                 terrain fit
//!   + Σ logcosh(Σ_k V^(k) W^(k)ᵀ W^(k) x_k − y)    behavior fit
//!   + Σ logcosh(Σ_k U^(k) e_k + (a − y))           self-reflection fit
//!   + λ1 ‖V⊗W‖_B + λ2 ‖U‖_R + orthogonality penalties
//! ```
//!
//! The self-reflection residual trains the offset to cancel the observed
//! `actual − expected` gap, so adding the offset to a command compensates
//! the gap instead of repeating it.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::solver::compute_reweights;
use crate::tensor::{log_cosh, Tensor3};

use super::norms::{behavior_sq, history_sq, orth_sq};
use super::{behavior_norm, history_norm, orth_penalty, Dataset, Hyperparams, ModelWeights};

/// Instance-major copy of a dataset for the inner loops.
pub(crate) struct Prepared {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub l: usize,
    pub b: usize,
    /// `[s][k][j]`
    xs: Vec<f64>,
    /// `[s][k][r]`
    es: Vec<f64>,
    /// `[s][i]`
    z: Vec<f64>,
    /// `[s][r]`
    y: Vec<f64>,
    /// `[s][r]`, `a − y`
    gap: Vec<f64>,
}

impl Prepared {
    pub fn new(ds: &Dataset) -> Self {
        let dims = ds.dims();
        let (n, d, c, l, b) = (ds.len(), dims.d, dims.c, dims.l, dims.b);
        let mut xs = Vec::with_capacity(n * c * d);
        let mut es = Vec::with_capacity(n * c * b);
        for s in 0..n {
            for k in 0..c {
                xs.extend((0..d).map(|j| ds.features.get(j, s, k)));
            }
            for k in 0..c {
                es.extend((0..b).map(|r| ds.behavior_diffs.get(r, s, k)));
            }
        }
        let mut z = Vec::with_capacity(n * l);
        let mut y = Vec::with_capacity(n * b);
        let mut gap = Vec::with_capacity(n * b);
        for s in 0..n {
            z.extend((0..l).map(|i| ds.terrain_labels.get(i, s)));
            y.extend((0..b).map(|r| ds.expected.get(r, s)));
            gap.extend((0..b).map(|r| ds.actual.get(r, s) - ds.expected.get(r, s)));
        }
        Self {
            n,
            d,
            c,
            l,
            b,
            xs,
            es,
            z,
            y,
            gap,
        }
    }
}

/// `[k][row][col]` copy of a tensor whose rows are `height` and cols `width`.
fn depth_major(t: &Tensor3) -> Vec<f64> {
    let (h, w, c) = (t.height, t.width, t.depth);
    let mut out = vec![0.0; h * w * c];
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                out[(k * h + i) * w + j] = t.get(i, j, k);
            }
        }
    }
    out
}

fn from_depth_major(h: usize, w: usize, c: usize, src: &[f64]) -> Tensor3 {
    Tensor3::from_fn(h, w, c, |i, j, k| src[(k * h + i) * w + j])
}

/// Terrain and behavior losses; optional gradient with respect to `W`.
pub(crate) fn eval_terrain_behavior(
    p: &Prepared,
    weights: &ModelWeights,
    want_grad: bool,
) -> (f64, f64, Option<Tensor3>) {
    let (n, d, c, l, b) = (p.n, p.d, p.c, p.l, p.b);
    let wk = depth_major(&weights.w);
    let vk = depth_major(&weights.v);
    let mut gw = if want_grad { vec![0.0; l * d * c] } else { Vec::new() };
    let mut proj = vec![0.0; c * l];
    let mut lifted = vec![0.0; c * d];
    let mut r1 = vec![0.0; l];
    let mut r2 = vec![0.0; b];
    let mut h = vec![0.0; d];
    let mut wh = vec![0.0; l];
    let (mut terrain, mut behavior) = (0.0, 0.0);

    for s in 0..n {
        r1.copy_from_slice(&p.z[s * l..(s + 1) * l]);
        r1.iter_mut().for_each(|x| *x = -*x);
        for (r, x) in r2.iter_mut().enumerate() {
            *x = -p.y[s * b + r];
        }
        for k in 0..c {
            let x = &p.xs[(s * c + k) * d..(s * c + k + 1) * d];
            let wslice = &wk[k * l * d..(k + 1) * l * d];
            let pk = &mut proj[k * l..(k + 1) * l];
            for i in 0..l {
                let row = &wslice[i * d..(i + 1) * d];
                pk[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
                r1[i] += pk[i];
            }
            let qk = &mut lifted[k * d..(k + 1) * d];
            qk.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..l {
                let row = &wslice[i * d..(i + 1) * d];
                let pi = pk[i];
                for (q, w) in qk.iter_mut().zip(row) {
                    *q += w * pi;
                }
            }
            let vslice = &vk[k * b * d..(k + 1) * b * d];
            for (r, out) in r2.iter_mut().enumerate() {
                let row = &vslice[r * d..(r + 1) * d];
                *out += row.iter().zip(qk.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        terrain += r1.iter().map(|&x| log_cosh(x)).sum::<f64>();
        behavior += r2.iter().map(|&x| log_cosh(x)).sum::<f64>();

        if want_grad {
            r1.iter_mut().for_each(|x| *x = x.tanh());
            r2.iter_mut().for_each(|x| *x = x.tanh());
            for k in 0..c {
                let x = &p.xs[(s * c + k) * d..(s * c + k + 1) * d];
                let wslice = &wk[k * l * d..(k + 1) * l * d];
                let vslice = &vk[k * b * d..(k + 1) * b * d];
                let pk = &proj[k * l..(k + 1) * l];
                // h = V^(k)ᵀ g2, wh = W^(k) h
                h.iter_mut().for_each(|v| *v = 0.0);
                for r in 0..b {
                    let g = r2[r];
                    for (hj, vj) in h.iter_mut().zip(&vslice[r * d..(r + 1) * d]) {
                        *hj += vj * g;
                    }
                }
                for i in 0..l {
                    wh[i] = wslice[i * d..(i + 1) * d]
                        .iter()
                        .zip(&h)
                        .map(|(a, b)| a * b)
                        .sum();
                }
                let gslice = &mut gw[k * l * d..(k + 1) * l * d];
                for i in 0..l {
                    let ax = r1[i] + wh[i];
                    let ah = pk[i];
                    let grow = &mut gslice[i * d..(i + 1) * d];
                    for j in 0..d {
                        grow[j] += ax * x[j] + ah * h[j];
                    }
                }
            }
        }
    }
    let grad = want_grad.then(|| from_depth_major(l, d, c, &gw));
    (terrain, behavior, grad)
}

/// `q_{s,k} = W^(k)ᵀ W^(k) x_{s,k}` for every instance, laid out `[s][k][j]`.
pub(crate) fn projected_features(p: &Prepared, w: &Tensor3) -> Vec<f64> {
    let (n, d, c, l) = (p.n, p.d, p.c, p.l);
    let wk = depth_major(w);
    let mut out = vec![0.0; n * c * d];
    let mut pk = vec![0.0; l];
    for s in 0..n {
        for k in 0..c {
            let x = &p.xs[(s * c + k) * d..(s * c + k + 1) * d];
            let wslice = &wk[k * l * d..(k + 1) * l * d];
            for i in 0..l {
                pk[i] = wslice[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
            }
            let q = &mut out[(s * c + k) * d..(s * c + k + 1) * d];
            for i in 0..l {
                for (qj, wj) in q.iter_mut().zip(&wslice[i * d..(i + 1) * d]) {
                    *qj += wj * pk[i];
                }
            }
        }
    }
    out
}

/// Behavior loss as a function of `V` with `W` frozen into `q`.
pub(crate) fn eval_v_block(p: &Prepared, q: &[f64], v: &Tensor3, want_grad: bool) -> (f64, Option<Tensor3>) {
    let (n, d, c, b) = (p.n, p.d, p.c, p.b);
    let vk = depth_major(v);
    let mut gv = if want_grad { vec![0.0; b * d * c] } else { Vec::new() };
    let mut r = vec![0.0; b];
    let mut loss = 0.0;
    for s in 0..n {
        for (rr, x) in r.iter_mut().enumerate() {
            *x = -p.y[s * b + rr];
        }
        for k in 0..c {
            let qk = &q[(s * c + k) * d..(s * c + k + 1) * d];
            for (rr, out) in r.iter_mut().enumerate() {
                let row = &vk[(k * b + rr) * d..(k * b + rr + 1) * d];
                *out += row.iter().zip(qk).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        loss += r.iter().map(|&x| log_cosh(x)).sum::<f64>();
        if want_grad {
            for k in 0..c {
                let qk = &q[(s * c + k) * d..(s * c + k + 1) * d];
                for (rr, res) in r.iter().enumerate() {
                    let g = res.tanh();
                    let row = &mut gv[(k * b + rr) * d..(k * b + rr + 1) * d];
                    for (gj, qj) in row.iter_mut().zip(qk) {
                        *gj += g * qj;
                    }
                }
            }
        }
    }
    (loss, want_grad.then(|| from_depth_major(b, d, c, &gv)))
}

/// Self-reflection loss `Σ logcosh(Σ_k U^(k) e_k + (a − y))`.
pub(crate) fn eval_offset(p: &Prepared, u: &Tensor3, want_grad: bool) -> (f64, Option<Tensor3>) {
    let (n, c, b) = (p.n, p.c, p.b);
    let uk = depth_major(u);
    let mut gu = if want_grad { vec![0.0; b * b * c] } else { Vec::new() };
    let mut r = vec![0.0; b];
    let mut loss = 0.0;
    for s in 0..n {
        r.copy_from_slice(&p.gap[s * b..(s + 1) * b]);
        for k in 0..c {
            let e = &p.es[(s * c + k) * b..(s * c + k + 1) * b];
            for (rr, out) in r.iter_mut().enumerate() {
                let row = &uk[(k * b + rr) * b..(k * b + rr + 1) * b];
                *out += row.iter().zip(e).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        loss += r.iter().map(|&x| log_cosh(x)).sum::<f64>();
        if want_grad {
            for k in 0..c {
                let e = &p.es[(s * c + k) * b..(s * c + k + 1) * b];
                for (rr, res) in r.iter().enumerate() {
                    let g = res.tanh();
                    let row = &mut gu[(k * b + rr) * b..(k * b + rr + 1) * b];
                    for (gj, ej) in row.iter_mut().zip(e) {
                        *gj += g * ej;
                    }
                }
            }
        }
    }
    (loss, want_grad.then(|| from_depth_major(b, b, c, &gu)))
}

/// Every term of the objective, evaluated separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub terrain_loss: f64,
    pub behavior_loss: f64,
    pub offset_loss: f64,
    /// Unweighted behavior norm.
    pub behavior_norm: f64,
    /// Unweighted history norm.
    pub history_norm: f64,
    /// Multiplier-weighted orthogonality penalty.
    pub orth_penalty: f64,
    pub total: f64,
}

pub(crate) fn check_shapes(weights: &ModelWeights, ds: &Dataset) -> Result<()> {
    weights.validate()?;
    ds.validate()?;
    if weights.dims() != ds.dims() {
        return dim_err(format!(
            "weights dims {:?} vs dataset dims {:?}",
            weights.dims(),
            ds.dims()
        ));
    }
    Ok(())
}

pub(crate) fn breakdown_prepared(
    p: &Prepared,
    weights: &ModelWeights,
    ds: &Dataset,
    hyper: &Hyperparams,
) -> Result<ObjectiveBreakdown> {
    let (terrain_loss, behavior_loss, _) = eval_terrain_behavior(p, weights, false);
    let (offset_loss, _) = eval_offset(p, &weights.u, false);
    let bn = behavior_norm(weights, &ds.layout)?;
    let hn = history_norm(weights);
    let orth = orth_penalty(weights, hyper);
    let total = terrain_loss
        + behavior_loss
        + offset_loss
        + hyper.lambda1 * bn
        + hyper.lambda2 * hn
        + orth;
    for (name, v) in [
        ("terrain loss", terrain_loss),
        ("behavior loss", behavior_loss),
        ("offset loss", offset_loss),
        ("behavior norm", bn),
        ("history norm", hn),
        ("orthogonality penalty", orth),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    Ok(ObjectiveBreakdown {
        terrain_loss,
        behavior_loss,
        offset_loss,
        behavior_norm: bn,
        history_norm: hn,
        orth_penalty: orth,
        total,
    })
}

/// Evaluates the full penalized objective.
pub fn objective(weights: &ModelWeights, ds: &Dataset, hyper: &Hyperparams) -> Result<ObjectiveBreakdown> {
    check_shapes(weights, ds)?;
    breakdown_prepared(&Prepared::new(ds), weights, ds, hyper)
}

/// Gradient of the three log-cosh fit terms only.
pub fn smooth_gradient(weights: &ModelWeights, ds: &Dataset) -> Result<ModelWeights> {
    check_shapes(weights, ds)?;
    let p = Prepared::new(ds);
    let (_, _, gw) = eval_terrain_behavior(&p, weights, true);
    let q = projected_features(&p, &weights.w);
    let (_, gv) = eval_v_block(&p, &q, &weights.v, true);
    let (_, gu) = eval_offset(&p, &weights.u, true);
    Ok(ModelWeights {
        w: gw.expect("requested"),
        v: gv.expect("requested"),
        u: gu.expect("requested"),
    })
}

/// Gradient of the full objective.
///
/// Norm terms are differentiated through their quadratic majorizers built at
/// `weights`, which have the same gradient as the norms wherever a norm
/// exceeds `epsilon`. Below `epsilon` the guard keeps the result finite.
pub fn gradient(weights: &ModelWeights, ds: &Dataset, hyper: &Hyperparams) -> Result<ModelWeights> {
    let mut g = smooth_gradient(weights, ds)?;
    let rw = compute_reweights(weights, &ds.layout, hyper.epsilon)?;
    behavior_sq(weights, &ds.layout, &rw.qb, hyper.lambda1, Some(&mut g.w), Some(&mut g.v));
    let scaled = |coef: &[f64], m: f64| coef.iter().map(|q| q * m).collect::<Vec<_>>();
    orth_sq(
        &weights.w,
        &scaled(&rw.ql, hyper.lambda_l),
        &scaled(&rw.qd, hyper.lambda_d),
        &scaled(&rw.qc, hyper.lambda_c),
        Some(&mut g.w),
    );
    history_sq(&weights.u, &scaled(&rw.pr, hyper.lambda2), Some(&mut g.u));
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(g)
}
