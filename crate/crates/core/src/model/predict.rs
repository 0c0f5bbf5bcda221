use crate::error::{dim_err, Result};
use crate::tensor::{contract, Matrix};

use super::ModelWeights;

/// Terrain scores `Σ_k W^(k) x_k`. The predicted class is the argmax.
pub fn predict_terrain(weights: &ModelWeights, x: &Matrix) -> Result<Vec<f64>> {
    contract(&weights.w, x)
}

/// Terrain-aware behavior `Σ_k V^(k) (W^(k))ᵀ W^(k) x_k`.
///
/// Features are projected onto terrain space by `W^(k)`, lifted back with its
/// transpose, and mapped to behaviors by `V^(k)`.
pub fn predict_behavior(weights: &ModelWeights, x: &Matrix) -> Result<Vec<f64>> {
    let (w, v) = (&weights.w, &weights.v);
    if x.rows != w.width || x.cols != w.depth || v.width != w.width || v.depth != w.depth {
        return dim_err(format!(
            "predict_behavior: w {:?}, v {:?}, x {}x{}",
            w.shape(),
            v.shape(),
            x.rows,
            x.cols
        ));
    }
    let (l, d, c, b) = (w.height, w.width, w.depth, v.height);
    let mut out = vec![0.0; b];
    let mut p = vec![0.0; l];
    let mut q = vec![0.0; d];
    for k in 0..c {
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = (0..d).map(|j| w.get(i, j, k) * x.get(j, k)).sum();
        }
        for (j, qj) in q.iter_mut().enumerate() {
            *qj = (0..l).map(|i| w.get(i, j, k) * p[i]).sum();
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += (0..d).map(|j| v.get(r, j, k) * q[j]).sum::<f64>();
        }
    }
    Ok(out)
}

/// Self-reflective offset `Σ_k U^(k) e_k` from a `b × c` matrix of past
/// `actual − expected` differences.
pub fn predict_offset(weights: &ModelWeights, e: &Matrix) -> Result<Vec<f64>> {
    contract(&weights.u, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use crate::tensor::Tensor3;

    fn loop_behavior(m: &ModelWeights, x: &Matrix) -> Vec<f64> {
        // y_r = Σ_k Σ_j Σ_j' Σ_i V[r,j,k] W[i,j,k] W[i,j',k] x[j',k]
        let Dims { l, d, b, c } = m.dims();
        let mut y = vec![0.0; b];
        for (r, yr) in y.iter_mut().enumerate() {
            for k in 0..c {
                for j in 0..d {
                    for jp in 0..d {
                        for i in 0..l {
                            *yr += m.v.get(r, j, k) * m.w.get(i, j, k) * m.w.get(i, jp, k) * x.get(jp, k);
                        }
                    }
                }
            }
        }
        y
    }

    #[test]
    fn terrain_identity_and_zero() {
        let dims = Dims { l: 3, d: 3, b: 2, c: 1 };
        let mut m = ModelWeights::zeros(dims);
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.0]]);
        assert_eq!(predict_terrain(&m, &x).unwrap(), vec![0.0; 3]);
        m.w = Tensor3::from_fn(3, 3, 1, |i, j, _| if i == j { 1.0 } else { 0.0 });
        assert_eq!(predict_terrain(&m, &x).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn behavior_reduces_with_orthonormal_w() {
        let dims = Dims { l: 2, d: 2, b: 2, c: 2 };
        let mut m = ModelWeights::random_uniform(dims, 1.0, 3);
        let (s, co) = (0.3f64.sin(), 0.3f64.cos());
        // rotation slices have orthonormal rows spanning R^2
        m.w = Tensor3::from_fn(2, 2, 2, |i, j, _| match (i, j) {
            (0, 0) | (1, 1) => co,
            (0, 1) => -s,
            _ => s,
        });
        let x = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]);
        let got = predict_behavior(&m, &x).unwrap();
        let want = contract(&m.v, &x).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn behavior_matches_loop_oracle() {
        let dims = Dims { l: 2, d: 3, b: 2, c: 2 };
        let m = ModelWeights::random_uniform(dims, 1.0, 11);
        let x = Matrix::from_fn(3, 2, |r, c| (r as f64 - 1.0) * 0.7 + c as f64 * 0.3);
        let got = predict_behavior(&m, &x).unwrap();
        let want = loop_behavior(&m, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
        let mut z = m.clone();
        z.v = Tensor3::zeros(2, 3, 2);
        assert_eq!(predict_behavior(&z, &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn offset_cases() {
        let dims = Dims { l: 1, d: 1, b: 2, c: 1 };
        let mut m = ModelWeights::zeros(dims);
        m.u = Tensor3::from_fn(2, 2, 1, |i, j, _| if i == j { 1.0 } else { 0.0 });
        let e = Matrix::from_rows(&[vec![-0.4], vec![0.1]]);
        assert_eq!(predict_offset(&m, &e).unwrap(), vec![-0.4, 0.1]);
        assert_eq!(predict_offset(&m, &Matrix::zeros(2, 1)).unwrap(), vec![0.0, 0.0]);

        let dims = Dims { l: 1, d: 1, b: 2, c: 3 };
        let m = ModelWeights::random_uniform(dims, 1.0, 5);
        let e = Matrix::from_fn(2, 3, |r, c| (r * 3 + c) as f64 - 2.5);
        let got = predict_offset(&m, &e).unwrap();
        for (r, g) in got.iter().enumerate() {
            let mut want = 0.0;
            for k in 0..3 {
                for q in 0..2 {
                    want += m.u.get(r, q, k) * e.get(q, k);
                }
            }
            assert!((g - want).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let m = ModelWeights::zeros(Dims { l: 2, d: 3, b: 2, c: 2 });
        assert!(predict_behavior(&m, &Matrix::zeros(2, 2)).is_err());
        assert!(predict_offset(&m, &Matrix::zeros(3, 2)).is_err());
    }
}
