//! Dense spectral oracle and subspace diagnostics.
//!
//! Everything the iterative methods claim is checked against this module at
//! small scale: a cyclic Jacobi eigensolver (dense, guarded to order 2000),
//! Rayleigh-Ritz extraction for residual diagnostics, and principal angles
//! between feature spans. Jacobi is slow but has no failure modes that a
//! tolerance can hide, which is exactly what an oracle should be.

use crate::dense::{orthonormalize, DenseMatrix};
use crate::error::{OfmError, Result};
use crate::kernels::spmm_serial;
use crate::sparse::SparseSym;

/// Largest order the dense oracle will densify or factorize.
pub const ORACLE_GUARD: usize = 2000;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues ascending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Full eigendecomposition of a symmetric dense matrix by cyclic Jacobi
/// rotations.
///
/// Sweeps run until the off-diagonal Frobenius norm falls below
/// `1e-12 ||A||_F`. Input must be square, of order at most
/// [`ORACLE_GUARD`], and symmetric to `1e-12` (relative to its largest
/// entry).
pub fn jacobi_eig(a: &DenseMatrix) -> Result<EigenPairs> {
    if !a.is_square() {
        return Err(OfmError::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let n = a.n_rows();
    if n > ORACLE_GUARD {
        return Err(OfmError::OracleGuard { n, guard: ORACLE_GUARD });
    }
    let sym_tol = 1e-12 * a.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > sym_tol {
                return Err(OfmError::NotSymmetric(format!(
                    "({i}, {j}) differs from ({j}, {i}) by {:e}",
                    (a.get(i, j) - a.get(j, i)).abs()
                )));
            }
        }
    }
    if n == 0 {
        return Ok(EigenPairs { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }

    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let target = 1e-12 * a.frobenius_norm();
    // Skipping rotations below target/n still lets a full sweep push the
    // off-diagonal norm under target.
    let skip = target / n as f64;

    let mut done = false;
    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            done = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= skip {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // Symmetric Schur rotation annihilating (p, q).
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !done && off_diagonal_norm(&m) > target {
        return Err(OfmError::EigNotConverged { sweeps: MAX_SWEEPS });
    }

    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.col(src).to_vec();
        vectors.col_mut(dst).copy_from_slice(&col);
    }
    Ok(EigenPairs { values, vectors })
}

fn off_diagonal_norm(m: &DenseMatrix) -> f64 {
    let n = m.n_rows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                let e = m.get(i, j);
                acc += e * e;
            }
        }
    }
    acc.sqrt()
}

/// Apply the two-sided rotation in coordinates (p, q) to `m` and accumulate
/// the one-sided rotation into `v`.
fn rotate(m: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.n_rows();
    // m <- m J (column pair), contiguous in column-major storage.
    for r in 0..n {
        let mp = m.get(r, p);
        let mq = m.get(r, q);
        m.set(r, p, c * mp - s * mq);
        m.set(r, q, s * mp + c * mq);
    }
    // m <- J^T m (row pair).
    for jcol in 0..n {
        let mp = m.get(p, jcol);
        let mq = m.get(q, jcol);
        m.set(p, jcol, c * mp - s * mq);
        m.set(q, jcol, s * mp + c * mq);
    }
    // The rotation is built to annihilate this pair; store the zeros exactly.
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);
    // v <- v J.
    for r in 0..n {
        let vp = v.get(r, p);
        let vq = v.get(r, q);
        v.set(r, p, c * vp - s * vq);
        v.set(r, q, s * vp + c * vq);
    }
}

/// Bottom-`k` eigenpairs of a shifted operator, via densification.
///
/// Besides the size guard this asserts the defining property of the shifted
/// operators this crate builds: every eigenvalue must lie in
/// `[-2 - 1e-9, 1e-9]`.
pub fn bottom_k(a: &SparseSym, k: usize) -> Result<EigenPairs> {
    let n = a.n();
    if n > ORACLE_GUARD {
        return Err(OfmError::OracleGuard { n, guard: ORACLE_GUARD });
    }
    if k == 0 || k > n {
        return Err(OfmError::InvalidArgument(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let full = jacobi_eig(&a.to_dense())?;
    for &lam in &full.values {
        if !(-2.0 - 1e-9..=1e-9).contains(&lam) {
            return Err(OfmError::SpectrumOutOfRange { value: lam, lo: -2.0 - 1e-9, hi: 1e-9 });
        }
    }
    let mut vectors = DenseMatrix::zeros(n, k);
    for j in 0..k {
        let col = full.vectors.col(j).to_vec();
        vectors.col_mut(j).copy_from_slice(&col);
    }
    Ok(EigenPairs { values: full.values[..k].to_vec(), vectors })
}

/// Rayleigh-Ritz extraction: orthonormalize the block, factorize the
/// projected operator, and lift the small eigenvectors back up. Values come
/// back ascending with orthonormal Ritz vectors.
pub fn rayleigh_ritz(a: &SparseSym, x: &DenseMatrix) -> Result<EigenPairs> {
    if x.n_rows() != a.n() {
        return Err(OfmError::DimensionMismatch(format!(
            "block has {} rows but operator order is {}",
            x.n_rows(),
            a.n()
        )));
    }
    let q = orthonormalize(x)?;
    let aq = spmm_serial(a, &q);
    let small = q.transpose_times(&aq);
    let pairs = jacobi_eig(&small)?;
    let vectors = q.times(&pairs.vectors);
    Ok(EigenPairs { values: pairs.values, vectors })
}

/// Principal angles (radians, ascending) between the column spans of two
/// blocks over the same row space.
///
/// Cosines come from the singular values of `Qx^T Qy`; angles whose cosine
/// is close to one are recomputed from the orthogonal complement so that
/// near-identical spans resolve angles down to about `1e-10` rather than
/// the `sqrt(eps)` limit of the arccosine alone.
pub fn principal_angles(x: &DenseMatrix, y: &DenseMatrix) -> Result<Vec<f64>> {
    if x.n_rows() != y.n_rows() {
        return Err(OfmError::DimensionMismatch(format!(
            "blocks have {} and {} rows",
            x.n_rows(),
            y.n_rows()
        )));
    }
    let qx = orthonormalize(x)?;
    let qy = orthonormalize(y)?;
    let r = qx.n_cols().min(qy.n_cols());

    // Cosines: eigenvalues of M^T M are the squared singular values of M.
    let m = qx.transpose_times(&qy);
    let mtm = m.transpose_times(&m);
    let cos_eigs = jacobi_eig(&mtm)?;
    let mut cos2: Vec<f64> = cos_eigs.values.iter().map(|&l| l.clamp(0.0, 1.0)).collect();
    cos2.reverse(); // descending: largest cosine = smallest angle first

    // Sines: the complement R = Qy - Qx M satisfies R^T R = I - M^T M.
    let mut rm = qy.clone();
    rm.add_scaled(-1.0, &qx.times(&m));
    let rtr = rm.transpose_times(&rm);
    let sin_eigs = jacobi_eig(&rtr)?;
    let sin2: Vec<f64> = sin_eigs.values.iter().map(|&l| l.clamp(0.0, 1.0)).collect();
    // ascending: smallest sine = smallest angle first, pairing with cos2

    let mut angles: Vec<f64> = (0..r)
        .map(|j| {
            if cos2[j] > 0.5 {
                sin2[j].sqrt().asin()
            } else {
                cos2[j].sqrt().acos()
            }
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(angles)
}

/// Relative Ritz residual of a feature block against the positive-definite
/// companion `B = I - A` of the shifted operator `A`:
/// `||B U - U diag(theta)||_F / ||U diag(theta)||_F` with `(theta, U)` the
/// Rayleigh-Ritz pairs of the block against `B`.
pub fn relative_residual(a: &SparseSym, x: &DenseMatrix) -> Result<f64> {
    let b = a.identity_minus();
    let pairs = rayleigh_ritz(&b, x)?;
    let bu = spmm_serial(&b, &pairs.vectors);
    let mut scaled = pairs.vectors.clone();
    for j in 0..scaled.n_cols() {
        let theta = pairs.values[j];
        for e in scaled.col_mut(j) {
            *e *= theta;
        }
    }
    let mut diff = bu;
    diff.add_scaled(-1.0, &scaled);
    Ok(diff.frobenius_norm() / scaled.frobenius_norm().max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shifted_operator, generate_sbm, Graph};
    use proptest::prelude::*;

    #[test]
    fn jacobi_solves_two_by_two() {
        let a = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let pairs = jacobi_eig(&a).unwrap();
        assert!((pairs.values[0] - 1.0).abs() < 1e-12);
        assert!((pairs.values[1] - 3.0).abs() < 1e-12);
        // Eigenvector of 1 is (1, -1)/sqrt(2) up to sign.
        let v0 = pairs.vectors.col(0);
        assert!((v0[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((v0[0] + v0[1]).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrix() {
        let g = DenseMatrix::gaussian(60, 60, 1.0, 17);
        let mut a = g.clone();
        a.add_scaled(1.0, &g.transpose());
        let pairs = jacobi_eig(&a).unwrap();
        // Ascending order.
        for w in pairs.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        // Orthonormal vectors.
        let vtv = pairs.vectors.transpose_times(&pairs.vectors);
        assert!(vtv.max_abs_diff(&DenseMatrix::identity(60)) < 1e-12);
        // A V = V diag(values).
        let av = a.times(&pairs.vectors);
        let mut vl = pairs.vectors.clone();
        for j in 0..60 {
            let lam = pairs.values[j];
            for e in vl.col_mut(j) {
                *e *= lam;
            }
        }
        let scale = a.frobenius_norm();
        assert!(av.max_abs_diff(&vl) < 1e-11 * scale);
    }

    #[test]
    fn jacobi_rejects_asymmetry_and_oversize() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(jacobi_eig(&a), Err(OfmError::NotSymmetric(_))));
        let big = DenseMatrix::zeros(ORACLE_GUARD + 1, ORACLE_GUARD + 1);
        assert!(matches!(jacobi_eig(&big), Err(OfmError::OracleGuard { .. })));
    }

    #[test]
    fn path_graph_spectrum_is_pinned() {
        // Path on 3 nodes: the shifted operator has eigenvalues -2, -1, 0.
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        let a = build_shifted_operator(&g);
        let pairs = bottom_k(&a, 3).unwrap();
        for (got, want) in pairs.values.iter().zip([-2.0, -1.0, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn disjoint_cliques_have_repeated_bottom_eigenvalue() {
        let (g, _) = generate_sbm(8, 2, 1.0, 0.0, 1.0, 1).unwrap();
        let a = build_shifted_operator(&g);
        let pairs = bottom_k(&a, 2).unwrap();
        assert!((pairs.values[0] + 2.0).abs() < 1e-12);
        assert!((pairs.values[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn bottom_k_rejects_foreign_spectra() {
        let m = SparseSym::from_pairs(2, &[5.0, 5.0], &[]).unwrap();
        assert!(matches!(bottom_k(&m, 1), Err(OfmError::SpectrumOutOfRange { .. })));
    }

    #[test]
    fn rayleigh_ritz_recovers_eigenpairs_from_their_span() {
        let (g, _) = generate_sbm(40, 2, 0.5, 0.1, 1.0, 3).unwrap();
        let a = build_shifted_operator(&g);
        let oracle = bottom_k(&a, 3).unwrap();
        // Mix the eigenvector block by a random rotation; Ritz must undo it.
        let q = crate::dense::random_orthogonal(3, 5);
        let mixed = oracle.vectors.times(&q);
        let ritz = rayleigh_ritz(&a, &mixed).unwrap();
        for (got, want) in ritz.values.iter().zip(&oracle.values) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        let angles = principal_angles(&ritz.vectors, &oracle.vectors).unwrap();
        assert!(angles.iter().all(|&t| t < 1e-8));
    }

    #[test]
    fn rayleigh_ritz_rejects_rank_deficient_blocks() {
        let (g, _) = generate_sbm(20, 2, 0.5, 0.1, 1.0, 7).unwrap();
        let a = build_shifted_operator(&g);
        let mut x = DenseMatrix::gaussian(20, 3, 1.0, 9);
        let c = x.col(0).to_vec();
        x.col_mut(2).copy_from_slice(&c);
        assert!(matches!(rayleigh_ritz(&a, &x), Err(OfmError::RankDeficient(_))));
    }

    #[test]
    fn principal_angles_of_rotated_span_vanish() {
        let x = DenseMatrix::gaussian(50, 4, 1.0, 11);
        let q = crate::dense::random_orthogonal(4, 12);
        let y = x.times(&q);
        let angles = principal_angles(&x, &y).unwrap();
        assert_eq!(angles.len(), 4);
        assert!(angles.iter().all(|&t| t < 1e-10), "{angles:?}");
    }

    #[test]
    fn principal_angles_of_disjoint_coordinate_spans() {
        let mut x = DenseMatrix::zeros(6, 2);
        x.set(0, 0, 1.0);
        x.set(1, 1, 1.0);
        let mut y = DenseMatrix::zeros(6, 2);
        y.set(2, 0, 1.0);
        y.set(3, 1, 1.0);
        let angles = principal_angles(&x, &y).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(angles.iter().all(|&t| (t - half_pi).abs() < 1e-12));

        // Overlap in exactly one coordinate: angles {0, pi/2}.
        let mut z = DenseMatrix::zeros(6, 2);
        z.set(1, 0, 1.0);
        z.set(4, 1, 1.0);
        let angles = principal_angles(&x, &z).unwrap();
        assert!(angles[0] < 1e-12);
        assert!((angles[1] - half_pi).abs() < 1e-12);
    }

    #[test]
    fn residual_is_tiny_on_eigenvector_blocks_and_large_on_noise() {
        let (g, _) = generate_sbm(100, 4, 0.5, 0.05, 1.0, 13).unwrap();
        let a = build_shifted_operator(&g);
        let oracle = bottom_k(&a, 4).unwrap();
        let res = relative_residual(&a, &oracle.vectors).unwrap();
        assert!(res < 1e-10, "eigenvector residual {res}");
        let noise = DenseMatrix::gaussian(100, 4, 1.0, 14);
        let res = relative_residual(&a, &noise).unwrap();
        assert!(res > 0.1, "noise residual {res}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn shifted_spectra_stay_in_range(n in 2usize..40, seed in 0u64..10_000) {
            let blocks = 1 + (seed as usize) % 3.min(n);
            let (g, _) = generate_sbm(n, blocks, 0.5, 0.1, 1.0, seed).unwrap();
            let a = build_shifted_operator(&g);
            let pairs = bottom_k(&a, n).unwrap(); // range-checked internally
            prop_assert!(pairs.values.len() == n);
        }
    }
}
