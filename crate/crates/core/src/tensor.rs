//! Dense matrices and 3-way tensors.
//!
//! Storage is row-major. A [`Tensor3`] of shape `height × width × depth`
//! stores element `(i, j, k)` at `(i * width + j) * depth + k`, so the depth
//! index varies fastest. Checkpoints and dataset files serialize the flat
//! `data` array in this order.
//!
//! The only contraction the model needs is the depth-slice product
//! `y = Σ_k W^(k) x_k`, where `W^(k)` is the `height × width` slice at depth
//! `k` and `x_k` is the `k`-th column of a `width × depth` matrix.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Above this magnitude `log(cosh(x))` is evaluated as `|x| + log1p(e^{-2|x|}) - ln 2`.
pub const LOG_COSH_STABLE_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Height,
    Width,
    Depth,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return dim_err(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for p in 0..self.cols {
                let a = self.get(i, p);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(p, j);
                }
            }
        }
        Ok(out)
    }

    /// `self · selfᵀ`.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..self.rows {
                let mut s = 0.0;
                for p in 0..self.cols {
                    s += self.get(i, p) * self.get(j, p);
                }
                out.data[i * self.rows + j] = s;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense 3-way array, `height × width × depth`, depth-fastest storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub height: usize,
    pub width: usize,
    pub depth: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(height: usize, width: usize, depth: usize) -> Self {
        Self {
            height,
            width,
            depth,
            data: vec![0.0; height * width * depth],
        }
    }

    pub fn from_vec(height: usize, width: usize, depth: usize, data: Vec<f64>) -> Result<Self> {
        let t = Self {
            height,
            width,
            depth,
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        depth: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * depth);
        for i in 0..height {
            for j in 0..width {
                for k in 0..depth {
                    data.push(f(i, j, k));
                }
            }
        }
        Self {
            height,
            width,
            depth,
            data,
        }
    }

    /// Checks the storage length against the declared shape.
    pub fn validate(&self) -> Result<()> {
        let want = self.height * self.width * self.depth;
        if self.data.len() != want {
            return dim_err(format!(
                "tensor {}x{}x{} needs {want} entries, got {}",
                self.height,
                self.width,
                self.depth,
                self.data.len()
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.depth]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.width + j) * self.depth + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn axis_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::Height => self.height,
            Axis::Width => self.width,
            Axis::Depth => self.depth,
        }
    }

    /// Extracts one 2-D slice.
    ///
    /// * `Height, i` gives `width × depth` with entries `t[i][j][k]`.
    /// * `Width, j` gives `height × depth` with entries `t[i][j][k]`.
    /// * `Depth, k` gives `height × width` with entries `t[i][j][k]`.
    pub fn unstack(&self, axis: Axis, index: usize) -> Result<Matrix> {
        let n = self.axis_len(axis);
        if index >= n {
            return dim_err(format!("{axis:?} index {index} out of range 0..{n}"));
        }
        Ok(match axis {
            Axis::Height => Matrix::from_fn(self.width, self.depth, |j, k| self.get(index, j, k)),
            Axis::Width => Matrix::from_fn(self.height, self.depth, |i, k| self.get(i, index, k)),
            Axis::Depth => Matrix::from_fn(self.height, self.width, |i, j| self.get(i, j, index)),
        })
    }

    /// Inverse of [`Tensor3::unstack`] over every index of `axis`.
    pub fn stack(axis: Axis, slices: &[Matrix]) -> Result<Tensor3> {
        let Some(first) = slices.first() else {
            return dim_err("cannot stack zero slices");
        };
        let (r, c) = (first.rows, first.cols);
        if slices.iter().any(|s| s.rows != r || s.cols != c) {
            return dim_err("slices differ in shape");
        }
        let n = slices.len();
        Ok(match axis {
            Axis::Height => Tensor3::from_fn(n, r, c, |i, j, k| slices[i].get(j, k)),
            Axis::Width => Tensor3::from_fn(r, n, c, |i, j, k| slices[j].get(i, k)),
            Axis::Depth => Tensor3::from_fn(r, c, n, |i, j, k| slices[k].get(i, j)),
        })
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        Tensor3 {
            data: self.data.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Depth-slice contraction: `out_i = Σ_k Σ_j w[i][j][k] · x[j][k]`.
pub fn contract(w: &Tensor3, x: &Matrix) -> Result<Vec<f64>> {
    if w.width != x.rows || w.depth != x.cols {
        return dim_err(format!(
            "contract {}x{}x{} with {}x{}",
            w.height, w.width, w.depth, x.rows, x.cols
        ));
    }
    let mut out = vec![0.0; w.height];
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..w.width {
            let base = w.index(i, j, 0);
            for k in 0..w.depth {
                s += w.data[base + k] * x.data[j * x.cols + k];
            }
        }
        *o = s;
    }
    Ok(out)
}

/// `log(cosh(x))`, overflow-safe.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a > LOG_COSH_STABLE_THRESHOLD {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    } else {
        a.cosh().ln()
    }
}

/// Derivative of [`log_cosh`].
#[inline]
pub fn log_cosh_grad(x: f64) -> f64 {
    x.tanh()
}

/// Sum of `log(cosh(·))` over all entries.
pub fn log_cosh_sum(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::NonFinite("log-cosh input".into()));
    }
    Ok(m.data.iter().map(|&x| log_cosh(x)).sum())
}

/// Elementwise `tanh`, the gradient of [`log_cosh_sum`].
pub fn log_cosh_sum_grad(m: &Matrix) -> Matrix {
    Matrix {
        rows: m.rows,
        cols: m.cols,
        data: m.data.iter().map(|&x| log_cosh_grad(x)).collect(),
    }
}

pub fn fro_norm(m: &Matrix) -> f64 {
    m.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖M Mᵀ − I‖_F`, the orthogonality residual of a slice.
pub fn gram_residual_norm(m: &Matrix) -> f64 {
    let mut g = m.gram();
    for i in 0..g.rows {
        g.data[i * g.rows + i] -= 1.0;
    }
    fro_norm(&g)
}
