//! Iteratively reweighted block-coordinate minimization of the penalized
//! objective.
//!
//! Each outer iteration rebuilds the quadratic majorizers of every norm term
//! at the current point and minimizes the majorized objective over `W`, then
//! `V`, then `U`, each with the other blocks held fixed. The log-cosh fit
//! terms are kept exact. Since every majorizer touches its norm at the
//! current point, decreasing the majorized objective decreases the true one;
//! a final guard rejects any block step that would raise the true objective,
//! which covers the `ε`-guarded groups where the surrogate does not touch.

mod lbfgs;
mod reweights;

pub use reweights::{compute_reweights, reweight, surrogate, surrogate_pairs, Reweights, SurrogatePairs};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::norms::{behavior_sq, history_sq, orth_sq};
use crate::model::{
    breakdown_prepared, check_shapes, eval_offset, eval_terrain_behavior, eval_v_block, orth_residuals,
    projected_features, Dataset, Hyperparams, ModelWeights, ObjectiveBreakdown, Prepared,
};
use crate::tensor::Matrix;

/// Initial weights are uniform in `[-INIT_SCALE, INIT_SCALE]`.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub inner_max_steps: usize,
    /// Inner solves stop once the largest gradient entry is below this.
    pub inner_step_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            tol: 1e-6,
            inner_max_steps: 50,
            inner_step_tol: 1e-9,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("solver.tol", format!("must be > 0, got {}", self.tol)));
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("solver.max_outer_iters", "must be >= 1"));
        }
        if self.inner_max_steps == 0 {
            return Err(invalid("solver.inner_max_steps", "must be >= 1"));
        }
        if !(self.inner_step_tol >= 0.0 && self.inner_step_tol.is_finite()) {
            return Err(invalid("solver.inner_step_tol", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    W,
    V,
    U,
}

/// One record per outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: ObjectiveBreakdown,
    /// Largest `‖M Mᵀ − I‖_F` over all slices of `W`.
    pub max_orth_residual: f64,
    /// Blocks whose update was rejected this iteration.
    pub stalled_blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Objective at initialization followed by one value per outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Seconds; not serialized so that saved reports are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub weights: ModelWeights,
    pub objective: ObjectiveBreakdown,
    pub stalled: bool,
}

fn scaled(coef: &[f64], m: f64) -> Vec<f64> {
    coef.iter().map(|q| q * m).collect()
}

fn surrogate_consts(q: &[f64], m: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        m * q.iter().map(|q| 0.25 / q).sum::<f64>()
    }
}

/// Majorized objective used by `block`: exact fit terms plus every norm
/// replaced by its surrogate under `rw`. The `V` block uses `rw.ob` for the
/// behavior groups, the others use `rw.qb`.
pub fn majorized_objective(
    block: Block,
    weights: &ModelWeights,
    ds: &Dataset,
    hyper: &Hyperparams,
    rw: &Reweights,
) -> Result<f64> {
    check_shapes(weights, ds)?;
    let p = Prepared::new(ds);
    let (t, b, _) = eval_terrain_behavior(&p, weights, false);
    let (o, _) = eval_offset(&p, &weights.u, false);
    let qb = if block == Block::V { &rw.ob } else { &rw.qb };
    let value = t
        + b
        + o
        + behavior_sq(weights, &ds.layout, qb, hyper.lambda1, None, None)
        + surrogate_consts(&qb.data, hyper.lambda1)
        + orth_sq(
            &weights.w,
            &scaled(&rw.ql, hyper.lambda_l),
            &scaled(&rw.qd, hyper.lambda_d),
            &scaled(&rw.qc, hyper.lambda_c),
            None,
        )
        + surrogate_consts(&rw.ql, hyper.lambda_l)
        + surrogate_consts(&rw.qd, hyper.lambda_d)
        + surrogate_consts(&rw.qc, hyper.lambda_c)
        + history_sq(&weights.u, &scaled(&rw.pr, hyper.lambda2), None)
        + surrogate_consts(&rw.pr, hyper.lambda2);
    if !value.is_finite() {
        return Err(Error::NonFinite("majorized objective".into()));
    }
    Ok(value)
}

struct Ctx<'a> {
    p: &'a Prepared,
    ds: &'a Dataset,
    hyper: &'a Hyperparams,
    config: &'a SolverConfig,
}

/// Minimizes the block's majorized objective; returns the new block entries.
fn inner_solve(ctx: &Ctx, block: Block, weights: &ModelWeights, qb: &Matrix, rw: &Reweights) -> Vec<f64> {
    let h = ctx.hyper;
    let mut scratch = weights.clone();
    let (steps, tol) = (ctx.config.inner_max_steps, ctx.config.inner_step_tol);
    match block {
        Block::W => {
            let (ql, qd, qc) = (
                scaled(&rw.ql, h.lambda_l),
                scaled(&rw.qd, h.lambda_d),
                scaled(&rw.qc, h.lambda_c),
            );
            let mut x = weights.w.data.clone();
            lbfgs::minimize(
                &mut x,
                |x, g| {
                    scratch.w.data.copy_from_slice(x);
                    let want = g.is_some();
                    let (t, b, gw) = eval_terrain_behavior(ctx.p, &scratch, want);
                    let mut gw = gw;
                    let mut f = t + b;
                    f += behavior_sq(&scratch, &ctx.ds.layout, qb, h.lambda1, gw.as_mut(), None);
                    f += orth_sq(&scratch.w, &ql, &qd, &qc, gw.as_mut());
                    if let (Some(g), Some(gw)) = (g, gw) {
                        g.copy_from_slice(&gw.data);
                    }
                    f
                },
                steps,
                tol,
            );
            x
        }
        Block::V => {
            let q = projected_features(ctx.p, &weights.w);
            let mut x = weights.v.data.clone();
            lbfgs::minimize(
                &mut x,
                |x, g| {
                    scratch.v.data.copy_from_slice(x);
                    let (b, gv) = eval_v_block(ctx.p, &q, &scratch.v, g.is_some());
                    let mut gv = gv;
                    let f = b + behavior_sq(&scratch, &ctx.ds.layout, qb, h.lambda1, None, gv.as_mut());
                    if let (Some(g), Some(gv)) = (g, gv) {
                        g.copy_from_slice(&gv.data);
                    }
                    f
                },
                steps,
                tol,
            );
            x
        }
        Block::U => {
            let pr = scaled(&rw.pr, h.lambda2);
            let mut x = weights.u.data.clone();
            lbfgs::minimize(
                &mut x,
                |x, g| {
                    scratch.u.data.copy_from_slice(x);
                    let (o, gu) = eval_offset(ctx.p, &scratch.u, g.is_some());
                    let mut gu = gu;
                    let f = o + history_sq(&scratch.u, &pr, gu.as_mut());
                    if let (Some(g), Some(gu)) = (g, gu) {
                        g.copy_from_slice(&gu.data);
                    }
                    f
                },
                steps,
                tol,
            );
            x
        }
    }
}

fn block_data(m: &mut ModelWeights, block: Block) -> &mut Vec<f64> {
    match block {
        Block::W => &mut m.w.data,
        Block::V => &mut m.v.data,
        Block::U => &mut m.u.data,
    }
}

const GUARD_HALVINGS: usize = 30;

fn guarded_update(
    ctx: &Ctx,
    block: Block,
    weights: &ModelWeights,
    current: &ObjectiveBreakdown,
    rw: &Reweights,
) -> Result<BlockOutcome> {
    let qb = if block == Block::V { &rw.ob } else { &rw.qb };
    let target = inner_solve(ctx, block, weights, qb, rw);
    let mut old = weights.clone();
    let start = block_data(&mut old, block).clone();
    let mut t = 1.0;
    for _ in 0..=GUARD_HALVINGS {
        let mut cand = weights.clone();
        for ((c, s), e) in block_data(&mut cand, block).iter_mut().zip(&start).zip(&target) {
            *c = if t == 1.0 { *e } else { s + t * (e - s) };
        }
        if let Ok(ob) = breakdown_prepared(ctx.p, &cand, ctx.ds, ctx.hyper) {
            if ob.total <= current.total {
                return Ok(BlockOutcome {
                    weights: cand,
                    objective: ob,
                    stalled: false,
                });
            }
        }
        t *= 0.5;
    }
    Ok(BlockOutcome {
        weights: weights.clone(),
        objective: *current,
        stalled: true,
    })
}

/// Updates one block against the majorizers in `rw`, never increasing the
/// true objective. A rejected step returns the input unchanged with `stalled`.
pub fn block_update(
    block: Block,
    weights: &ModelWeights,
    ds: &Dataset,
    hyper: &Hyperparams,
    rw: &Reweights,
    config: &SolverConfig,
) -> Result<BlockOutcome> {
    check_shapes(weights, ds)?;
    hyper.validate()?;
    config.validate()?;
    let p = Prepared::new(ds);
    let ctx = Ctx {
        p: &p,
        ds,
        hyper,
        config,
    };
    let current = breakdown_prepared(&p, weights, ds, hyper)?;
    guarded_update(&ctx, block, weights, &current, rw)
}

/// Runs the solver from seeded uniform initial weights.
pub fn solve(ds: &Dataset, hyper: &Hyperparams, config: &SolverConfig) -> Result<(ModelWeights, SolverReport)> {
    let init = ModelWeights::random_uniform(ds.dims(), INIT_SCALE, config.seed);
    solve_from(init, ds, hyper, config)
}

/// Runs the solver from the given initial weights.
pub fn solve_from(
    init: ModelWeights,
    ds: &Dataset,
    hyper: &Hyperparams,
    config: &SolverConfig,
) -> Result<(ModelWeights, SolverReport)> {
    let started = Instant::now();
    hyper.validate()?;
    config.validate()?;
    if ds.is_empty() {
        return Err(invalid("dataset", "no instances"));
    }
    check_shapes(&init, ds)?;
    if ds.dims().c != hyper.history_len {
        return Err(invalid(
            "history_len",
            format!("dataset windows have c = {}, hyperparams say {}", ds.dims().c, hyper.history_len),
        ));
    }
    let p = Prepared::new(ds);
    let ctx = Ctx {
        p: &p,
        ds,
        hyper,
        config,
    };
    let mut weights = init;
    let mut current = breakdown_prepared(&p, &weights, ds, hyper)?;
    let mut trace = vec![current.total];
    let mut records = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=config.max_outer_iters {
        iterations = it;
        let before = current.total;
        let mut stalled_blocks = Vec::new();

        let mut rw = compute_reweights(&weights, &ds.layout, hyper.epsilon)?;
        let out = guarded_update(&ctx, Block::W, &weights, &current, &rw)?;
        if out.stalled {
            stalled_blocks.push(Block::W);
        }
        (weights, current) = (out.weights, out.objective);

        rw.ob = compute_reweights(&weights, &ds.layout, hyper.epsilon)?.ob;
        let out = guarded_update(&ctx, Block::V, &weights, &current, &rw)?;
        if out.stalled {
            stalled_blocks.push(Block::V);
        }
        (weights, current) = (out.weights, out.objective);

        let out = guarded_update(&ctx, Block::U, &weights, &current, &rw)?;
        if out.stalled {
            stalled_blocks.push(Block::U);
        }
        (weights, current) = (out.weights, out.objective);

        trace.push(current.total);
        records.push(IterationRecord {
            iteration: it,
            objective: current,
            max_orth_residual: orth_residuals(&weights.w).max(),
            stalled_blocks,
        });
        let rel = (before - current.total).abs() / before.abs().max(f64::MIN_POSITIVE);
        log::debug!("outer {it}: objective {:.10e} rel change {rel:.3e}", current.total);
        if rel < config.tol {
            converged = true;
            break;
        }
    }
    Ok((
        weights,
        SolverReport {
            iterations,
            objective_trace: trace,
            converged,
            wall_time: started.elapsed().as_secs_f64(),
            records,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dims, FeatureLayout};
    use crate::tensor::Tensor3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ds(dims: Dims, n: usize, seed: u64, layout: Vec<usize>) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Dims { l, d, b, c } = dims;
        let mut r = |_: usize| rng.gen_range(-1.0..1.0);
        let features = Tensor3::from_vec(d, n, c, (0..d * n * c).map(&mut r).collect()).unwrap();
        let expected = Matrix::from_vec(b, n, (0..b * n).map(&mut r).collect()).unwrap();
        let actual = Matrix::from_vec(b, n, (0..b * n).map(&mut r).collect()).unwrap();
        let behavior_diffs = Tensor3::from_vec(b, n, c, (0..b * n * c).map(&mut r).collect()).unwrap();
        let terrain_labels = Matrix::from_fn(l, n, |i, s| if s % l == i { 1.0 } else { 0.0 });
        Dataset {
            features,
            terrain_labels,
            expected,
            actual,
            behavior_diffs,
            layout: FeatureLayout::unnamed(layout).unwrap(),
        }
    }

    #[test]
    fn block_update_decreases_majorized_objective() {
        let dims = Dims { l: 2, d: 6, b: 2, c: 3 };
        let ds = random_ds(dims, 40, 1, vec![3, 3]);
        let h = Hyperparams {
            history_len: 3,
            ..Default::default()
        };
        let m = ModelWeights::random_uniform(dims, 0.1, 2);
        let rw = compute_reweights(&m, &ds.layout, h.epsilon).unwrap();
        let cfg = SolverConfig::default();
        for block in [Block::W, Block::V, Block::U] {
            let before = majorized_objective(block, &m, &ds, &h, &rw).unwrap();
            let out = block_update(block, &m, &ds, &h, &rw, &cfg).unwrap();
            let after = majorized_objective(block, &out.weights, &ds, &h, &rw).unwrap();
            assert!(after < before, "{block:?}: {after} !< {before}");
            let again = block_update(block, &m, &ds, &h, &rw, &cfg).unwrap();
            assert_eq!(again, out);
        }
    }

    #[test]
    fn stationary_block_is_unchanged() {
        let dims = Dims { l: 2, d: 2, b: 1, c: 1 };
        let mut ds = random_ds(dims, 2, 3, vec![2]);
        ds.features = Tensor3::from_fn(2, 2, 1, |j, s, _| if j == s { 1.0 } else { 0.0 });
        ds.terrain_labels = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        ds.expected = Matrix::zeros(1, 2);
        ds.actual = Matrix::zeros(1, 2);
        ds.behavior_diffs = Tensor3::zeros(1, 2, 1);
        let h = Hyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            history_len: 1,
            ..Default::default()
        }
        .with_multipliers(0.0);
        let mut m = ModelWeights::zeros(dims);
        m.w = Tensor3::from_fn(2, 2, 1, |i, j, _| if i == j { 1.0 } else { 0.0 });
        let rw = compute_reweights(&m, &ds.layout, h.epsilon).unwrap();
        for block in [Block::W, Block::V, Block::U] {
            let out = block_update(block, &m, &ds, &h, &rw, &SolverConfig::default()).unwrap();
            assert_eq!(out.weights, m);
        }
    }

    #[test]
    fn solve_trace_is_monotone() {
        let dims = Dims { l: 2, d: 4, b: 2, c: 2 };
        let ds = random_ds(dims, 30, 5, vec![2, 2]);
        let h = Hyperparams {
            history_len: 2,
            ..Default::default()
        };
        let cfg = SolverConfig {
            max_outer_iters: 30,
            ..Default::default()
        };
        let (_, rep) = solve(&ds, &h, &cfg).unwrap();
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        assert_eq!(rep.records.len(), rep.iterations);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_outer_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
