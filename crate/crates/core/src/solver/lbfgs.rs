//! Limited-memory BFGS with Armijo backtracking, used for the inner block solves.

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LbfgsOutcome {
    pub value: f64,
    pub steps: usize,
    /// No step could decrease the objective.
    pub stalled: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` starting from `x` in place.
///
/// `f(x, Some(g))` must return the value and write the gradient into `g`;
/// `f(x, None)` returns the value only. Every accepted step satisfies the
/// Armijo condition, so the returned value never exceeds the initial one.
pub(crate) fn minimize<F>(x: &mut [f64], mut f: F, max_steps: usize, grad_tol: f64) -> LbfgsOutcome
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, Some(&mut g));
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(MEMORY);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(MEMORY);
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut steps = 0;
    let mut stalled = false;

    while steps < max_steps {
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax <= grad_tol {
            break;
        }
        // two-loop recursion
        dir.copy_from_slice(&g);
        let mut alpha = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &dir);
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha[i] * y;
            }
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / dot(&g, &g).sqrt().max(1.0),
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for i in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alpha[i] - beta) * s;
            }
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&g, &dir);
        if !(slope.is_finite() && slope < 0.0) {
            // fall back to steepest descent
            s_hist.clear();
            y_hist.clear();
            let scale = 1.0 / dot(&g, &g).sqrt().max(1.0);
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi * scale;
            }
            slope = dot(&g, &dir);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((xt, xi), di) in trial.iter_mut().zip(x.iter()).zip(&dir) {
                *xt = xi + t * di;
            }
            let ft = f(&trial, None);
            if ft.is_finite() && ft <= fx + ARMIJO * t * slope {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(_) = accepted else {
            stalled = true;
            break;
        };
        let ft = f(&trial, Some(&mut g_new));
        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        let decrease = fx - ft;
        fx = ft;
        steps += 1;
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        if decrease <= 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    LbfgsOutcome {
        value: fx,
        steps,
        stalled: stalled && steps == 0,
    }
}
