//! Symmetric sparse matrices in CSR form.
//!
//! Operators here are always symmetric, and the constructors build both
//! orientations of every off-diagonal entry from the same computed value, so
//! symmetry holds bitwise rather than merely to rounding.

use crate::dense::DenseMatrix;
use crate::error::{OfmError, Result};

/// Symmetric sparse matrix, CSR with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    /// Cached squared Frobenius norm; the f1 objective needs it every call.
    fro_sq: f64,
}

impl SparseSym {
    /// Build from triplets. Requires: indices in range, no duplicate
    /// positions, and an exactly matching value for every (j, i) given an
    /// (i, j). Triplets may arrive in any order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseSym> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(OfmError::InvalidArgument(format!(
                    "triplet ({i}, {j}) out of range for n = {n}"
                )));
            }
            entries.push((i, j, v));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(OfmError::InvalidArgument(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let m = Self::assemble(n, entries);
        m.check_symmetric()?;
        Ok(m)
    }

    /// Internal assembly from sorted, deduplicated entries.
    fn assemble(n: usize, entries: Vec<(usize, usize, f64)>) -> SparseSym {
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut fro_sq = 0.0;
        for &(_, j, v) in &entries {
            col_idx.push(j);
            values.push(v);
            fro_sq += v * v;
        }
        SparseSym { n, row_ptr, col_idx, values, fro_sq }
    }

    /// Build a symmetric matrix from a diagonal plus one value per undirected
    /// off-diagonal pair (u < v). Each pair value is stored twice, verbatim.
    pub fn from_pairs(
        n: usize,
        diagonal: &[f64],
        pairs: &[(usize, usize, f64)],
    ) -> Result<SparseSym> {
        if diagonal.len() != n {
            return Err(OfmError::DimensionMismatch(format!(
                "diagonal has length {}, expected {n}",
                diagonal.len()
            )));
        }
        let mut entries: Vec<(usize, usize, f64)> =
            Vec::with_capacity(n + 2 * pairs.len());
        for (i, &d) in diagonal.iter().enumerate() {
            if d != 0.0 {
                entries.push((i, i, d));
            }
        }
        for &(u, v, w) in pairs {
            if u >= n || v >= n {
                return Err(OfmError::InvalidArgument(format!(
                    "pair ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(OfmError::InvalidArgument(format!(
                    "pair ({u}, {v}) is a diagonal entry; pass it via `diagonal`"
                )));
            }
            entries.push((u, v, w));
            entries.push((v, u, w));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(OfmError::InvalidArgument(format!(
                    "duplicate pair at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        Ok(Self::assemble(n, entries))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries (both orientations of off-diagonal values).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.fro_sq
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.fro_sq.sqrt()
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Verify bitwise symmetry: every stored (i, j, v) has a stored (j, i, v).
    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let back = self.get(j, i);
                if back.to_bits() != v.to_bits() {
                    return Err(OfmError::NotSymmetric(format!(
                        "entry ({i}, {j}) = {v} but ({j}, {i}) = {back}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Densify (for oracle-scale problems only).
    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d.set(i, j, v);
            }
        }
        d
    }

    /// `I - self`, preserving the sparsity pattern plus the full diagonal.
    ///
    /// For the shifted operators built by this crate the result is positive
    /// definite with spectrum in [1 - 1e-9, 3 + 1e-9], which is what the
    /// residual diagnostics factorize against.
    pub fn identity_minus(&self) -> SparseSym {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut saw_diag = false;
            for (&j, &v) in cols.iter().zip(vals) {
                if i == j {
                    saw_diag = true;
                    let d = 1.0 - v;
                    if d != 0.0 {
                        entries.push((i, i, d));
                    }
                } else {
                    entries.push((i, j, -v));
                }
            }
            if !saw_diag {
                entries.push((i, i, 1.0));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Self::assemble(self.n, entries)
    }
}
