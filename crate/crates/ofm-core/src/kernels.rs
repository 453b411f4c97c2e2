//! Objectives, gradients, and triangularized update directions.
//!
//! Two objective families drive everything here. With `A` the shifted
//! operator (negative semi-definite) and `X` an N x k feature block:
//!
//! * family one: `f1(X) = ||A + X X^T||_F^2`, evaluated as
//!   `||A||_F^2 + 2 tr(X^T A X) + ||X^T X||_F^2` so no dense N x N matrix is
//!   ever formed;
//! * family two: `f2(X) = tr((2 I - X^T X) X^T A X)`.
//!
//! Each family has a plain gradient (`grad_f1`, `grad_f2`) and a
//! triangularized direction (`dir_g1`, `dir_g2`) that replaces symmetric
//! k x k factors with their upper-triangular parts (diagonal included). The
//! triangularized iterations break the rotation invariance of the objectives
//! and pin isolated eigenvector columns instead of an arbitrary rotated
//! basis. Every public evaluation performs exactly one sparse product.

use crate::dense::DenseMatrix;
use crate::error::{OfmError, Result};
use crate::sparse::SparseSym;

/// Objective family: `F1` fits `-X X^T` to `A`; `F2` is the trace-penalty
/// form. Both are minimized by bottom eigenvector blocks of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    F1,
    F2,
}

/// The four iteration kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Gradient of f1; converges to an orthogonal mix of bottom eigenvectors.
    OfmF1,
    /// Triangularized f1 direction; converges to scaled individual eigenvectors.
    TriOfmF1,
    /// Gradient of f2; eigenvector mix without the eigenvalue scaling.
    OfmF2,
    /// Triangularized f2 direction; individual unit eigenvectors.
    TriOfmF2,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::OfmF1, Method::TriOfmF1, Method::OfmF2, Method::TriOfmF2];

    pub fn family(self) -> Family {
        match self {
            Method::OfmF1 | Method::TriOfmF1 => Family::F1,
            Method::OfmF2 | Method::TriOfmF2 => Family::F2,
        }
    }

    /// True for the columnwise (triangularized) variants.
    pub fn is_triangularized(self) -> bool {
        matches!(self, Method::TriOfmF1 | Method::TriOfmF2)
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "ofm-f1" => Ok(Method::OfmF1),
            "triofm-f1" => Ok(Method::TriOfmF1),
            "ofm-f2" => Ok(Method::OfmF2),
            "triofm-f2" => Ok(Method::TriOfmF2),
            other => Err(OfmError::InvalidArgument(format!(
                "unknown method {other:?} (expected ofm-f1, triofm-f1, ofm-f2, or triofm-f2)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OfmF1 => "ofm-f1",
            Method::TriOfmF1 => "triofm-f1",
            Method::OfmF2 => "ofm-f2",
            Method::TriOfmF2 => "triofm-f2",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sparse-times-dense product `A * X` with CSR row-wise accumulation.
///
/// The reduction order is fixed (per output column, rows top to bottom, each
/// row in stored column order), so repeated calls are bitwise identical.
pub fn spmm_serial(a: &SparseSym, x: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.n(), x.n_rows(), "spmm: operand row mismatch");
    let n = a.n();
    let mut y = DenseMatrix::zeros(n, x.n_cols());
    for j in 0..x.n_cols() {
        let xc = x.col(j).to_vec();
        let yc = y.col_mut(j);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * xc[c];
            }
            yc[i] = acc;
        }
    }
    y
}

/// Objective value for the method's family, via one sparse product.
pub fn objective(method: Method, a: &SparseSym, x: &DenseMatrix) -> f64 {
    let w = spmm_serial(a, x);
    objective_from_parts(method.family(), a, x, &w)
}

/// Objective value given the cached product `w = A * x`.
pub fn objective_from_parts(
    family: Family,
    a: &SparseSym,
    x: &DenseMatrix,
    w: &DenseMatrix,
) -> f64 {
    match family {
        Family::F1 => a.frobenius_norm_sq() + objective_shift_free(family, x, w),
        Family::F2 => objective_shift_free(family, x, w),
    }
}

/// The objective minus its `X`-independent constant (`||A||_F^2` for family
/// one, zero for family two). Differences of this quantity equal differences
/// of the objective, so step acceptance can be decided without touching the
/// operator.
pub(crate) fn objective_shift_free(family: Family, x: &DenseMatrix, w: &DenseMatrix) -> f64 {
    let xtw = x.transpose_times(w);
    let xtx = x.transpose_times(x);
    match family {
        Family::F1 => 2.0 * xtw.trace() + xtx.frobenius_norm_sq(),
        Family::F2 => 2.0 * xtw.trace() - xtx.trace_product(&xtw),
    }
}

/// Gradient of f1: `4 A X + 4 X (X^T X)`.
pub fn grad_f1(a: &SparseSym, x: &DenseMatrix) -> DenseMatrix {
    let w = spmm_serial(a, x);
    grad_f1_from(x, &w)
}

fn grad_f1_from(x: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    let xtx = x.transpose_times(x);
    let mut g = x.times(&xtx);
    g.add_scaled(1.0, w);
    g.scale(4.0);
    g
}

/// Triangularized f1 direction: `A X + X triu(X^T X)`.
pub fn dir_g1(a: &SparseSym, x: &DenseMatrix) -> DenseMatrix {
    let w = spmm_serial(a, x);
    dir_g1_from(x, &w)
}

fn dir_g1_from(x: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    let t = x.transpose_times(x).triu();
    let mut g = x.times(&t);
    g.add_scaled(1.0, w);
    g
}

/// Gradient of f2: `4 A X - 2 X (X^T A X) - 2 A X (X^T X)`.
pub fn grad_f2(a: &SparseSym, x: &DenseMatrix) -> DenseMatrix {
    let w = spmm_serial(a, x);
    grad_f2_from(x, &w)
}

fn grad_f2_from(x: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    let xtw = x.transpose_times(w);
    let xtx = x.transpose_times(x);
    let mut g = w.clone();
    g.scale(4.0);
    g.add_scaled(-2.0, &x.times(&xtw));
    g.add_scaled(-2.0, &w.times(&xtx));
    g
}

/// Triangularized f2 direction:
/// `2 A X - A X triu(X^T X) - X triu(X^T A X)`.
pub fn dir_g2(a: &SparseSym, x: &DenseMatrix) -> DenseMatrix {
    let w = spmm_serial(a, x);
    dir_g2_from(x, &w)
}

fn dir_g2_from(x: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    let xtw_triu = x.transpose_times(w).triu();
    let xtx_triu = x.transpose_times(x).triu();
    let mut g = w.clone();
    g.scale(2.0);
    g.add_scaled(-1.0, &w.times(&xtx_triu));
    g.add_scaled(-1.0, &x.times(&xtw_triu));
    g
}

/// The update direction Algorithm-style drivers descend along (the gradient
/// for the plain methods, the triangularized direction otherwise).
pub fn direction(method: Method, a: &SparseSym, x: &DenseMatrix) -> DenseMatrix {
    let w = spmm_serial(a, x);
    direction_from(method, x, &w)
}

/// Same as [`direction`] with the sparse product `w = A * x` precomputed, so
/// a driver that already owns `w` spends no extra sparse work.
pub fn direction_from(method: Method, x: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    match method {
        Method::OfmF1 => grad_f1_from(x, w),
        Method::TriOfmF1 => dir_g1_from(x, w),
        Method::OfmF2 => grad_f2_from(x, w),
        Method::TriOfmF2 => dir_g2_from(x, w),
    }
}
