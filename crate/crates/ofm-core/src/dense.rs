//! Column-major dense matrices.
//!
//! Feature blocks are tall and skinny (N rows, k columns) and every method in
//! this crate walks them column by column, so storage is column-major and all
//! reductions run in a fixed order: down each column, columns left to right.
//! That makes results reproducible bit-for-bit across runs with the same
//! inputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{OfmError, Result};

/// Dense column-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// All-zero matrix.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a closure over (row, column).
    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(n_rows, n_cols);
        for j in 0..n_cols {
            for i in 0..n_rows {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Build from row-major nested slices (convenient in tests).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        DenseMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j])
    }

    /// Standard-normal entries scaled by `scale`, drawn column by column from
    /// a ChaCha stream seeded with `seed`. The draw order is part of the
    /// contract: same seed, same matrix.
    pub fn gaussian(n_rows: usize, n_cols: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseMatrix::zeros(n_rows, n_cols);
        for j in 0..n_cols {
            for i in 0..n_rows {
                m.set(i, j, scale * standard_normal(&mut rng));
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.data[j * self.n_rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.data[j * self.n_rows + i] = v;
    }

    /// Contiguous view of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    /// Mutable view of column `j`.
    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    /// Copy of row `i` (rows are strided; used sparingly).
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.get(i, j)).collect()
    }

    /// Raw storage, column-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Squared Frobenius norm, accumulated in storage order.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Euclidean norm of column `j`.
    pub fn col_norm(&self, j: usize) -> f64 {
        self.col(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Transpose (allocates).
    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_cols, self.n_rows, |i, j| self.get(j, i))
    }

    /// `self^T * other`: the (k_self x k_other) Gram-style product. Each entry
    /// is a single dot product of two contiguous columns, accumulated top to
    /// bottom.
    pub fn transpose_times(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_rows, other.n_rows, "transpose_times: row mismatch");
        let mut out = DenseMatrix::zeros(self.n_cols, other.n_cols);
        for j in 0..other.n_cols {
            let oc = other.col(j);
            for i in 0..self.n_cols {
                let sc = self.col(i);
                let mut acc = 0.0;
                for r in 0..self.n_rows {
                    acc += sc[r] * oc[r];
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// `self * other` with `other` small (k x m). Output columns are linear
    /// combinations of `self`'s columns, combined in column order.
    pub fn times(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows, "times: inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for j in 0..other.n_cols {
            let oj = out.col_mut(j);
            for l in 0..self.n_cols {
                let w = other.get(l, j);
                if w == 0.0 {
                    continue;
                }
                let sc = self.col(l);
                for r in 0..oj.len() {
                    oj[r] += w * sc[r];
                }
            }
        }
        out
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        for (d, o) in self.data.iter_mut().zip(other.data.iter()) {
            *d += alpha * o;
        }
    }

    /// `self = alpha * self`.
    pub fn scale(&mut self, alpha: f64) {
        for d in self.data.iter_mut() {
            *d *= alpha;
        }
    }

    /// Column `j` gets `alpha * other_col_j` added to it.
    pub fn add_scaled_col(&mut self, j: usize, alpha: f64, other: &DenseMatrix) {
        assert_eq!(self.n_rows, other.n_rows);
        let oc = other.col(j);
        let sc = self.col_mut(j);
        for r in 0..sc.len() {
            sc[r] += alpha * oc[r];
        }
    }

    /// Upper-triangular part including the diagonal; entries strictly below
    /// the diagonal are zeroed.
    pub fn triu(&self) -> DenseMatrix {
        let mut out = self.clone();
        for j in 0..out.n_cols {
            for i in (j + 1)..out.n_rows {
                out.set(i, j, 0.0);
            }
        }
        out
    }

    /// Trace of a square matrix.
    pub fn trace(&self) -> f64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.n_rows).map(|i| self.get(i, i)).sum()
    }

    /// Main diagonal.
    pub fn diag(&self) -> Vec<f64> {
        let m = self.n_rows.min(self.n_cols);
        (0..m).map(|i| self.get(i, i)).collect()
    }

    /// tr(self * other) accumulated without forming the product.
    pub fn trace_product(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n_cols, other.n_rows);
        assert_eq!(other.n_cols, self.n_rows);
        let mut acc = 0.0;
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                acc += self.get(i, j) * other.get(j, i);
            }
        }
        acc
    }

    /// Maximum absolute difference against another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Draw one standard normal via Box-Muller on the ChaCha stream.
///
/// `rand_distr` would also work; this keeps the dependency surface small and
/// the draw count per entry fixed (two uniforms).
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 is nudged away from zero so the log is finite.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Modified Gram-Schmidt with a second pass, returning a matrix with
/// orthonormal columns spanning the same space.
///
/// Fails with [`OfmError::RankDeficient`] if a column's remaining mass after
/// projection falls below `1e-12` times its original norm.
pub fn orthonormalize(x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.n_cols() == 0 || x.n_rows() < x.n_cols() {
        return Err(OfmError::InvalidArgument(format!(
            "orthonormalize needs a tall matrix with at least one column, got {}x{}",
            x.n_rows(),
            x.n_cols()
        )));
    }
    let mut q = x.clone();
    for j in 0..q.n_cols() {
        let original = q.col_norm(j);
        // Two projection passes: classic MGS re-orthogonalization, enough to
        // reach machine-precision orthogonality for well-conditioned inputs.
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = 0.0;
                {
                    let qi = q.col(i);
                    let qj = q.col(j);
                    for r in 0..qi.len() {
                        dot += qi[r] * qj[r];
                    }
                }
                let qi = q.col(i).to_vec();
                let qj = q.col_mut(j);
                for r in 0..qj.len() {
                    qj[r] -= dot * qi[r];
                }
            }
        }
        let norm = q.col_norm(j);
        if norm < 1e-12 * original.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Err(OfmError::RankDeficient(format!(
                "column {j} lost all mass under projection (norm {norm:.3e} vs original {original:.3e})"
            )));
        }
        let qj = q.col_mut(j);
        for r in 0..qj.len() {
            qj[r] /= norm;
        }
    }
    Ok(q)
}

/// Random orthogonal matrix of order `k` (Gram-Schmidt of a Gaussian draw).
pub fn random_orthogonal(k: usize, seed: u64) -> DenseMatrix {
    let g = DenseMatrix::gaussian(k, k, 1.0, seed);
    // A Gaussian square matrix is almost surely full rank; regenerate on the
    // (measure-zero, but cheap to guard) failure.
    match orthonormalize(&g) {
        Ok(q) => q,
        Err(_) => random_orthogonal(k, seed.wrapping_add(0x9e3779b97f4a7c15)),
    }
}
