//! Row normalization, k-means, and partition agreement metrics.
//!
//! Feature rows are length-normalized (zero rows stay zero), clustered by
//! Lloyd's algorithm under k-means++ seeding with independent restarts, and
//! scored against planted labels by adjusted Rand index and normalized
//! mutual information. Everything is seed-deterministic: restarts draw their
//! generators from `(seed, restart index)` and ties resolve by lowest index.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::dense::DenseMatrix;
use crate::error::{OfmError, Result};
use crate::graph::mix_seed;

/// A hard clustering of `n` points into `n_clusters` groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    /// Sum of squared distances to assigned centroids (winning restart).
    pub inertia: f64,
}

/// Scale every row to unit Euclidean length; rows with norm under `1e-300`
/// are left untouched (all-zero feature rows stay at the origin).
pub fn normalize_rows(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..x.n_rows() {
        let mut norm_sq = 0.0;
        for j in 0..x.n_cols() {
            let e = x.get(i, j);
            norm_sq += e * e;
        }
        let norm = norm_sq.sqrt();
        if norm < 1e-300 {
            continue;
        }
        for j in 0..x.n_cols() {
            out.set(i, j, x.get(i, j) / norm);
        }
    }
    out
}

/// k-means over the rows of `x`: k-means++ seeding, Lloyd iterations,
/// `n_init` independent restarts, lowest inertia wins (ties by restart
/// index).
pub fn kmeans(
    x: &DenseMatrix,
    k: usize,
    seed: u64,
    n_init: usize,
    max_iters: usize,
) -> Result<Labeling> {
    let n = x.n_rows();
    if k == 0 || k > n {
        return Err(OfmError::InvalidArgument(format!(
            "need 1 <= k <= n points, got k = {k}, n = {n}"
        )));
    }
    if n_init == 0 {
        return Err(OfmError::InvalidArgument("n_init must be positive".into()));
    }
    // Points as contiguous columns.
    let xt = x.transpose();

    let mut best: Option<Labeling> = None;
    for restart in 0..n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xc1u64 ^ (restart as u64) << 8));
        let centroids = plus_plus_seeding(&xt, k, &mut rng);
        let (labels, inertia_trace) = lloyd(&xt, k, centroids, max_iters);
        let inertia = *inertia_trace.last().unwrap();
        let better = match &best {
            None => true,
            Some(b) => inertia < b.inertia,
        };
        if better {
            best = Some(Labeling { labels, n_clusters: k, inertia });
        }
    }
    Ok(best.unwrap())
}

/// Squared Euclidean distance between point `j` of `xt` and a centroid.
fn dist_sq(xt: &DenseMatrix, j: usize, centroid: &[f64]) -> f64 {
    let p = xt.col(j);
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(centroid) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

/// k-means++ initialization: first centroid uniform, the rest drawn
/// proportionally to squared distance from the nearest chosen centroid.
fn plus_plus_seeding(xt: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = xt.n_cols();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centroids.push(xt.col(first).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|j| dist_sq(xt, j, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            // Every point coincides with a centroid; any point works.
            rng.gen_range(0..n)
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (j, &w) in d2.iter().enumerate() {
                u -= w;
                if u < 0.0 {
                    chosen = j;
                    break;
                }
            }
            chosen
        };
        centroids.push(xt.col(pick).to_vec());
        let c = centroids.last().unwrap();
        for j in 0..n {
            let d = dist_sq(xt, j, c);
            if d < d2[j] {
                d2[j] = d;
            }
        }
    }
    centroids
}

/// Lloyd iterations from given centroids. Returns final labels plus the
/// inertia after each assignment (non-increasing). Clusters that come up
/// empty claim the point currently farthest from its own centroid.
fn lloyd(
    xt: &DenseMatrix,
    k: usize,
    mut centroids: Vec<Vec<f64>>,
    max_iters: usize,
) -> (Vec<usize>, Vec<f64>) {
    let n = xt.n_cols();
    let d = xt.n_rows();
    let mut labels = vec![0usize; n];
    let mut inertia_trace = Vec::new();

    for _iter in 0..max_iters.max(1) {
        // Assignment (ties to the lowest centroid index).
        let mut changed = false;
        let mut inertia = 0.0;
        for j in 0..n {
            let mut best_c = 0;
            let mut best_d = dist_sq(xt, j, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let dd = dist_sq(xt, j, centroid);
                if dd < best_d {
                    best_d = dd;
                    best_c = c;
                }
            }
            if labels[j] != best_c {
                changed = true;
                labels[j] = best_c;
            }
            inertia += best_d;
        }

        // Repair empty clusters deterministically before the update step.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far_j = 0;
            let mut far_d = -1.0;
            for j in 0..n {
                if counts[labels[j]] <= 1 {
                    continue; // don't orphan another cluster
                }
                let dd = dist_sq(xt, j, &centroids[labels[j]]);
                if dd > far_d {
                    far_d = dd;
                    far_j = j;
                }
            }
            counts[labels[far_j]] -= 1;
            labels[far_j] = c;
            counts[c] = 1;
            changed = true;
        }

        inertia_trace.push(inertia);

        // Update.
        let mut sums = vec![vec![0.0; d]; k];
        for j in 0..n {
            let p = xt.col(j);
            let s = &mut sums[labels[j]];
            for r in 0..d {
                s[r] += p[r];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for r in 0..d {
                    sums[c][r] /= counts[c] as f64;
                }
                centroids[c] = std::mem::take(&mut sums[c]);
            }
        }

        if !changed && inertia_trace.len() > 1 {
            break;
        }
    }

    // Final inertia against the final centroids.
    let mut inertia = 0.0;
    for j in 0..n {
        inertia += dist_sq(xt, j, &centroids[labels[j]]);
    }
    inertia_trace.push(inertia);
    (labels, inertia_trace)
}

/// Contingency table between two labelings over compacted label ids.
fn contingency(a: &[usize], b: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(OfmError::DimensionMismatch(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(OfmError::InvalidArgument("labelings must be non-empty".into()));
    }
    let compact = |ls: &[usize]| {
        let mut map = std::collections::BTreeMap::new();
        for &l in ls {
            let next = map.len();
            map.entry(l).or_insert(next);
        }
        let ids: Vec<usize> = ls.iter().map(|l| map[l]).collect();
        (ids, map.len())
    };
    let (ia, ka) = compact(a);
    let (ib, kb) = compact(b);
    let mut table = vec![vec![0.0; kb]; ka];
    for (&x, &y) in ia.iter().zip(&ib) {
        table[x][y] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok((table, rows, cols))
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
///
/// `(index - expected) / (max - expected)` over pair counts; when the
/// denominator vanishes both partitions are the same trivial one and the
/// score is defined as 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let (table, rows, cols) = contingency(a, b)?;
    let n = a.len() as f64;
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n).max(f64::MIN_POSITIVE);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Normalized mutual information with arithmetic normalization
/// `2 I(U; V) / (H(U) + H(V))`, natural logarithms.
///
/// Two zero-entropy partitions agree trivially (1.0); exactly one
/// zero-entropy partition shares no information (0.0).
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let (table, rows, cols) = contingency(a, b)?;
    let n = a.len() as f64;
    let entropy = |margin: &[f64]| -> f64 {
        margin
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_a = entropy(&rows);
    let h_b = entropy(&cols);
    if h_a == 0.0 && h_b == 0.0 {
        return Ok(1.0);
    }
    if h_a == 0.0 || h_b == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let p = c / n;
                mi += p * (p / (rows[i] / n * (cols[j] / n))).ln();
            }
        }
    }
    Ok((2.0 * mi / (h_a + h_b)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn normalize_rows_preserves_zero_rows() {
        let mut x = DenseMatrix::zeros(3, 2);
        x.set(0, 0, 3.0);
        x.set(0, 1, 4.0);
        x.set(2, 0, -2.0);
        let n = normalize_rows(&x);
        assert!((n.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(n.get(1, 0), 0.0);
        assert_eq!(n.get(1, 1), 0.0);
        assert_eq!(n.get(2, 0), -1.0);
    }

    /// Three well-separated Gaussian blobs of 20 points each.
    fn blobs(seed: u64) -> (DenseMatrix, Vec<usize>) {
        let noise = DenseMatrix::gaussian(60, 2, 0.05, seed);
        let centers = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
        let mut x = DenseMatrix::zeros(60, 2);
        let mut truth = Vec::with_capacity(60);
        for i in 0..60 {
            let b = i / 20;
            truth.push(b);
            x.set(i, 0, centers[b].0 + noise.get(i, 0));
            x.set(i, 1, centers[b].1 + noise.get(i, 1));
        }
        (x, truth)
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let (x, truth) = blobs(1);
        for seed in 0..5 {
            let labeling = kmeans(&x, 3, seed, 10, 100).unwrap();
            assert_eq!(ari(&labeling.labels, &truth).unwrap(), 1.0, "seed {seed}");
        }
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let (x, _) = blobs(2);
        let a = kmeans(&x, 3, 7, 10, 100).unwrap();
        let b = kmeans(&x, 3, 7, 10, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_labels_are_isometry_invariant_for_fixed_seed() {
        // Rotating the feature rows preserves pairwise distances, so the
        // seeded k-means++ choices and the final labels coincide.
        let (x, _) = blobs(3);
        let q = crate::dense::random_orthogonal(2, 17);
        let xq = x.times(&q);
        let a = kmeans(&x, 3, 11, 10, 100).unwrap();
        let b = kmeans(&xq, 3, 11, 10, 100).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn kmeans_edge_cases() {
        let (x, _) = blobs(4);
        let one = kmeans(&x, 1, 0, 3, 50).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
        assert!(kmeans(&x, 61, 0, 3, 50).is_err());
        assert!(kmeans(&x, 0, 0, 3, 50).is_err());
        assert!(kmeans(&x, 3, 0, 0, 50).is_err());
    }

    #[test]
    fn lloyd_inertia_is_non_increasing() {
        let (x, _) = blobs(5);
        let xt = x.transpose();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let centroids = plus_plus_seeding(&xt, 3, &mut rng);
        let (_, trace) = lloyd(&xt, 3, centroids, 100);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "inertia rose: {w:?}");
        }
    }

    #[test]
    fn lloyd_repairs_empty_clusters() {
        // Second centroid far from every point: it must claim the farthest
        // point instead of dying.
        let x = DenseMatrix::from_rows(&[&[0.0], &[0.1], &[10.0]]);
        let xt = x.transpose();
        let centroids = vec![vec![0.0], vec![100.0]];
        let (labels, _) = lloyd(&xt, 2, centroids, 50);
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn ari_pinned_counterexample() {
        // Split pairs: exact value -1/2 up to formula round-off.
        let a = [0, 0, 1, 1];
        let b = [0, 1, 0, 1];
        assert!((ari(&a, &b).unwrap() - (-0.5)).abs() < 1e-12);
        assert_eq!(nmi(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn metrics_on_identical_and_trivial_partitions() {
        let a = [0, 1, 2, 0, 1, 2];
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
        assert_eq!(nmi(&a, &a).unwrap(), 1.0);
        let ones = [0, 0, 0, 0];
        assert_eq!(ari(&ones, &ones).unwrap(), 1.0);
        assert_eq!(nmi(&ones, &ones).unwrap(), 1.0);
        let split = [0, 1, 0, 1];
        assert_eq!(nmi(&ones, &split).unwrap(), 0.0);
        let singletons = [0, 1, 2, 3];
        assert_eq!(ari(&singletons, &singletons).unwrap(), 1.0);
    }

    #[test]
    fn ari_is_one_exactly_for_relabelings() {
        // Brute force over tiny labelings: ARI = 1 iff the partitions are
        // equal up to renaming.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let n = 3 + (rng.gen::<u64>() % 5) as usize;
            let a: Vec<usize> = (0..n).map(|_| (rng.gen::<u64>() % 3) as usize).collect();
            let b: Vec<usize> = (0..n).map(|_| (rng.gen::<u64>() % 3) as usize).collect();
            let same_partition = (0..n).all(|i| {
                (0..n).all(|j| (a[i] == a[j]) == (b[i] == b[j]))
            });
            let score = ari(&a, &b).unwrap();
            assert_eq!(score == 1.0, same_partition, "a = {a:?}, b = {b:?}, ari = {score}");
        }
    }

    #[test]
    fn independent_labelings_score_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let a: Vec<usize> = (0..2000).map(|_| (rng.gen::<u64>() % 3) as usize).collect();
        let b: Vec<usize> = (0..2000).map(|_| (rng.gen::<u64>() % 3) as usize).collect();
        assert!(ari(&a, &b).unwrap().abs() < 0.05);
        assert!(nmi(&a, &b).unwrap() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn metrics_are_symmetric_and_permutation_invariant(
            labels in proptest::collection::vec(0usize..4, 6..40),
            other in proptest::collection::vec(0usize..4, 6..40),
            perm_seed in 0u64..1000,
        ) {
            let n = labels.len().min(other.len());
            let a = &labels[..n];
            let b = &other[..n];
            prop_assert!((ari(a, b).unwrap() - ari(b, a).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(a, b).unwrap() - nmi(b, a).unwrap()).abs() < 1e-12);
            // Renaming the clusters of one side changes nothing.
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            let mut perm: Vec<usize> = (0..4).collect();
            for i in (1..4).rev() {
                let j = (rng.gen::<u64>() % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }
            let renamed: Vec<usize> = a.iter().map(|&l| perm[l]).collect();
            prop_assert!((ari(&renamed, b).unwrap() - ari(a, b).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&renamed, b).unwrap() - nmi(a, b).unwrap()).abs() < 1e-12);
        }
    }
}
