//! The verification suite behind `ofm verify` and the acceptance test
//! target: eleven numbered criteria, each a self-contained check with
//! pinned tolerances, reporting pass/fail plus a one-line summary.
//!
//! The heavyweight shared fixture — ten eigengap-screened SBM instances at
//! n = 500 with dense-oracle eigenpairs and converged features for all four
//! methods — is built once behind a `OnceLock` and reused by criteria 3, 5,
//! and 6 regardless of which runs first.

use std::sync::OnceLock;
use std::time::Instant;

use ofm_core::cluster::{ari, kmeans, nmi, normalize_rows};
use ofm_core::dense::DenseMatrix;
use ofm_core::driver::{run_ofm, OfmOptions};
use ofm_core::eig::{bottom_k, jacobi_eig, principal_angles, rayleigh_ritz};
use ofm_core::engine::{
    distributed_iteration, partition_1p5d, predict_iteration_cost, CommLedger, Relayout,
    spmm_1p5d,
};
use ofm_core::graph::{build_shifted_operator, generate_sbm, mix_seed, GroundTruth};
use ofm_core::kernels::{grad_f1, grad_f2, objective, spmm_serial, Family, Method};
use ofm_core::linesearch::{
    cubic_global, cubic_per_column, local_minima, solve_cubic_real, Cubic, StepSizes,
};
use ofm_core::sparse::SparseSym;

use crate::config::{CliError, ExperimentConfig, StreamConfig};
use crate::pipeline::{run_pipeline, run_streaming};

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:02} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.details
        )
    }
}

pub const CRITERION_COUNT: usize = 11;

const NAMES: [&str; CRITERION_COUNT] = [
    "gradient finite-difference agreement",
    "fixed-point residence",
    "isomorphism-invariant convergence",
    "exact line-search optimality",
    "clustering quality",
    "raw features match recovered eigenvectors",
    "streaming warm start",
    "distributed multiply equivalence",
    "cost-model consistency",
    "agreement-metric oracles",
    "operator spectral range",
];

/// Criteria cheap enough for a pre-commit run (everything that does not
/// need the n = 500 fixture).
pub const QUICK_IDS: [usize; 7] = [1, 2, 4, 8, 9, 10, 11];

/// Wall-clock budget per criterion in seconds (`INFINITY` = untimed).
/// Criteria sharing the heavyweight fixture charge its construction to
/// whichever of them runs first; each budget already covers that worst case.
const TIME_LIMITS: [f64; CRITERION_COUNT] = [
    5.0,
    30.0,
    120.0,
    f64::INFINITY,
    120.0,
    f64::INFINITY,
    f64::INFINITY,
    f64::INFINITY,
    f64::INFINITY,
    f64::INFINITY,
    f64::INFINITY,
];

pub fn all_ids() -> Vec<usize> {
    (1..=CRITERION_COUNT).collect()
}

struct Outcome {
    passed: bool,
    details: String,
}

fn ok(details: String) -> std::result::Result<Outcome, CliError> {
    Ok(Outcome { passed: true, details })
}

fn fail(details: String) -> std::result::Result<Outcome, CliError> {
    Ok(Outcome { passed: false, details })
}

/// Run one criterion by number (1-based).
pub fn run_criterion(id: usize) -> CriterionReport {
    let clock = Instant::now();
    let outcome = match id {
        1 => criterion_gradients(),
        2 => criterion_fixed_points(),
        3 => criterion_convergence(),
        4 => criterion_linesearch(),
        5 => criterion_clustering(),
        6 => criterion_feature_equivalence(),
        7 => criterion_streaming(),
        8 => criterion_spmm_equivalence(),
        9 => criterion_cost_model(),
        10 => criterion_metric_oracles(),
        11 => criterion_spectral_range(),
        _ => Err(CliError::Config(format!("no criterion {id}"))),
    };
    let (mut passed, mut details) = match outcome {
        Ok(o) => (o.passed, o.details),
        Err(e) => (false, format!("errored: {e}")),
    };
    let seconds = clock.elapsed().as_secs_f64();
    let limit = TIME_LIMITS[id.saturating_sub(1).min(CRITERION_COUNT - 1)];
    if seconds > limit {
        passed = false;
        details.push_str(&format!("; over time budget ({seconds:.1}s > {limit:.0}s)"));
    }
    CriterionReport {
        id,
        name: NAMES[id.saturating_sub(1).min(CRITERION_COUNT - 1)],
        passed,
        details,
        seconds,
    }
}

pub fn run_many(ids: &[usize]) -> Vec<CriterionReport> {
    ids.iter().map(|&id| run_criterion(id)).collect()
}

// ---------------------------------------------------------------------
// Shared n = 500 fixture
// ---------------------------------------------------------------------

const FIXTURE_N: usize = 500;
const FIXTURE_K: usize = 4;
const FIXTURE_P_IN: f64 = 0.1;
const FIXTURE_P_OUT: f64 = 0.005;
const FIXTURE_INSTANCES: usize = 10;
const FIXTURE_ITERS: usize = 200;
const KMEANS_REPEATS: usize = 10;
const KMEANS_RESTARTS: usize = 10;

struct Instance {
    seed: u64,
    a: SparseSym,
    truth: GroundTruth,
    /// Bottom five eigenvalues (ascending); the fifth certifies the gap.
    lambda: Vec<f64>,
    /// Bottom four orthonormal eigenvectors.
    u: DenseMatrix,
    /// Converged feature block and iteration count per method, in
    /// `Method::ALL` order.
    features: Vec<(DenseMatrix, usize)>,
    /// Ten-repeat average ARI of k-means on the oracle eigenvectors.
    oracle_ari: f64,
    /// Same protocol on each method's raw features.
    method_ari: Vec<f64>,
}

static FIXTURE: OnceLock<Vec<Instance>> = OnceLock::new();

/// Average ARI over independent seeded k-means repeats on row-normalized
/// features; only the clustering randomness varies between repeats.
fn repeat_ari(features: &DenseMatrix, truth: &GroundTruth, seed: u64) -> f64 {
    let feats = normalize_rows(features);
    let mut sum = 0.0;
    for rep in 0..KMEANS_REPEATS {
        let labeling = kmeans(
            &feats,
            FIXTURE_K,
            mix_seed(seed, 0x0ac5 ^ ((rep as u64) << 8)),
            KMEANS_RESTARTS,
            100,
        )
        .expect("k-means on fixture features");
        sum += ari(truth.labels(), &labeling.labels).expect("ARI on fixture labels");
    }
    sum / KMEANS_REPEATS as f64
}

fn fixture() -> &'static [Instance] {
    FIXTURE.get_or_init(|| {
        let mut instances = Vec::with_capacity(FIXTURE_INSTANCES);
        let mut seed = 9000u64;
        while instances.len() < FIXTURE_INSTANCES {
            let this_seed = seed;
            seed += 1;
            let (g, truth) = generate_sbm(
                FIXTURE_N,
                FIXTURE_K,
                FIXTURE_P_IN,
                FIXTURE_P_OUT,
                1.0,
                this_seed,
            )
            .expect("fixture SBM");
            let a = build_shifted_operator(&g);
            let pairs = bottom_k(&a, FIXTURE_K + 1).expect("fixture oracle");
            // Screen for a clear eigengap between the cluster eigenvalues
            // and the rest of the spectrum; degenerate seeds are skipped.
            if pairs.values[FIXTURE_K] - pairs.values[FIXTURE_K - 1] < 0.05 {
                continue;
            }
            let u = DenseMatrix::from_fn(FIXTURE_N, FIXTURE_K, |i, j| pairs.vectors.get(i, j));

            let mut features = Vec::with_capacity(Method::ALL.len());
            let mut method_ari = Vec::with_capacity(Method::ALL.len());
            for method in Method::ALL {
                let mut opts = OfmOptions::new(FIXTURE_K);
                opts.max_iters = FIXTURE_ITERS;
                opts.grad_tol = 1e-16;
                opts.seed = this_seed;
                let r = run_ofm(method, &a, &opts).expect("fixture run");
                method_ari.push(repeat_ari(&r.x, &truth, this_seed));
                features.push((r.x, r.iterations));
            }
            let oracle_ari = repeat_ari(&u, &truth, this_seed);
            instances.push(Instance {
                seed: this_seed,
                a,
                truth,
                lambda: pairs.values,
                u,
                features,
                oracle_ari,
                method_ari,
            });
        }
        instances
    })
}

// ---------------------------------------------------------------------
// 1. Gradients vs central finite differences
// ---------------------------------------------------------------------

fn fd_gradient(
    family: Family,
    a: &SparseSym,
    x: &DenseMatrix,
    h: f64,
) -> DenseMatrix {
    let method = match family {
        Family::F1 => Method::OfmF1,
        Family::F2 => Method::OfmF2,
    };
    DenseMatrix::from_fn(x.n_rows(), x.n_cols(), |i, j| {
        let mut plus = x.clone();
        plus.set(i, j, x.get(i, j) + h);
        let mut minus = x.clone();
        minus.set(i, j, x.get(i, j) - h);
        (objective(method, a, &plus) - objective(method, a, &minus)) / (2.0 * h)
    })
}

fn criterion_gradients() -> std::result::Result<Outcome, CliError> {
    let (n, k, h, tol) = (30, 3, 1e-5, 1e-5);
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let (g, _) = generate_sbm(n, 3, 0.4, 0.1, 1.0, 100 + seed)?;
        let a = build_shifted_operator(&g);
        let x = DenseMatrix::gaussian(n, k, 0.5, seed);
        for (family, grad) in [
            (Family::F1, grad_f1(&a, &x)),
            (Family::F2, grad_f2(&a, &x)),
        ] {
            let fd = fd_gradient(family, &a, &x, h);
            let mut diff = fd;
            diff.add_scaled(-1.0, &grad);
            let rel = diff.frobenius_norm() / grad.frobenius_norm().max(1.0);
            worst = worst.max(rel);
        }
    }
    let details = format!(
        "20 instances (n={n}, k={k}), both gradients vs central differences: \
         worst relative error {worst:.2e} (tolerance {tol:.0e})"
    );
    if worst < tol {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 2. Fixed points constructed from oracle eigenpairs
// ---------------------------------------------------------------------

/// Theorem-predicted stable point for each method: the f1 family freezes at
/// `U sqrt(-Lambda)` times a rotation (plain) or a sign diagonal
/// (triangularized); the f2 family at the orthonormal basis itself.
fn predicted_fixed_point(method: Method, pairs_u: &DenseMatrix, lambda: &[f64]) -> DenseMatrix {
    let k = pairs_u.n_cols();
    let mut base = pairs_u.clone();
    if method.family() == Family::F1 {
        for (j, &lam) in lambda.iter().take(k).enumerate() {
            let s = (-lam).max(0.0).sqrt();
            for v in base.col_mut(j) {
                *v *= s;
            }
        }
    }
    let mix = if method.is_triangularized() {
        let mut d = DenseMatrix::identity(k);
        d.set(1, 1, -1.0);
        d
    } else {
        ofm_core::dense::random_orthogonal(k, 0x5eed)
    };
    base.times(&mix)
}

fn criterion_fixed_points() -> std::result::Result<Outcome, CliError> {
    let k = 3;
    let mut worst_dir = 0.0f64;
    let mut worst_move = 0.0f64;
    let mut checked = 0;
    for &n in &[60usize, 120, 200] {
        // Eigengap-screened instance: scan seeds until the bottom-k block
        // separates cleanly from the rest of the spectrum.
        let mut seed = 300 + n as u64;
        let (a, pairs) = loop {
            let (g, _) = generate_sbm(n, 3, 0.4, 0.03, 1.0, seed)?;
            let a = build_shifted_operator(&g);
            let pairs = bottom_k(&a, k + 1)?;
            if pairs.values[k] - pairs.values[k - 1] >= 0.05 {
                break (a, pairs);
            }
            seed += 1;
        };
        let u = DenseMatrix::from_fn(n, k, |i, j| pairs.vectors.get(i, j));
        let a_norm = a.frobenius_norm();
        for method in Method::ALL {
            let x_star = predicted_fixed_point(method, &u, &pairs.values);
            let dir = ofm_core::kernels::direction(method, &a, &x_star);
            worst_dir = worst_dir.max(dir.frobenius_norm() / a_norm);

            // Ten ungated updates must not leave the point.
            let mut grid = partition_1p5d(&a, &x_star, 1)?;
            let mut ledger = CommLedger::new();
            let mut x = x_star.clone();
            let mut prev: Option<(DenseMatrix, DenseMatrix)> = None;
            for _ in 0..10 {
                let step = distributed_iteration(
                    method,
                    &mut grid,
                    &x,
                    prev.as_ref().map(|(v, g)| (v, g)),
                    &mut ledger,
                )?;
                x = step.x;
                prev = Some((step.v, step.g));
            }
            let mut moved = x;
            moved.add_scaled(-1.0, &x_star);
            worst_move =
                worst_move.max(moved.frobenius_norm() / x_star.frobenius_norm());
            checked += 1;
        }
    }
    let details = format!(
        "{checked} method/instance pairs: worst direction norm \
         {worst_dir:.2e}·||A||_F (tolerance 1e-8), worst drift over 10 \
         iterations {worst_move:.2e} relative (tolerance 1e-6)"
    );
    if worst_dir < 1e-8 && worst_move < 1e-6 {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 3. Convergence to the oracle eigenspace on the n = 500 fixture
// ---------------------------------------------------------------------

/// `||X X^T - U diag(-lambda) U^T||_F` evaluated through k x k Grams so the
/// n x n outer products are never formed.
fn f1_limit_error(x: &DenseMatrix, u: &DenseMatrix, lambda: &[f64]) -> f64 {
    let k = u.n_cols();
    let xtx = x.transpose_times(x);
    let m = u.transpose_times(x);
    let d: Vec<f64> = lambda.iter().take(k).map(|l| -l).collect();
    let t1 = xtx.trace_product(&xtx);
    let mut t2 = 0.0;
    for i in 0..k {
        for j in 0..m.n_cols() {
            t2 += d[i] * m.get(i, j) * m.get(i, j);
        }
    }
    let t3: f64 = d.iter().map(|v| v * v).sum();
    (t1 - 2.0 * t2 + t3).max(0.0).sqrt()
}

fn criterion_convergence() -> std::result::Result<Outcome, CliError> {
    let mut worst_angle = 0.0f64;
    let mut worst_f1 = 0.0f64;
    for inst in fixture() {
        let lambda_norm: f64 = inst.lambda[..FIXTURE_K]
            .iter()
            .map(|l| l * l)
            .sum::<f64>()
            .sqrt();
        for (m_idx, method) in Method::ALL.iter().enumerate() {
            let (x, iters) = &inst.features[m_idx];
            assert!(*iters <= FIXTURE_ITERS);
            match method.family() {
                Family::F2 => {
                    let angles = principal_angles(x, &inst.u)?;
                    let max = angles.iter().cloned().fold(0.0, f64::max);
                    worst_angle = worst_angle.max(max);
                }
                Family::F1 => {
                    let err = f1_limit_error(x, &inst.u, &inst.lambda) / lambda_norm;
                    worst_f1 = worst_f1.max(err);
                }
            }
        }
    }
    let details = format!(
        "{FIXTURE_INSTANCES} screened instances (n={FIXTURE_N}), <= {FIXTURE_ITERS} iterations: \
         f2-family worst principal angle {worst_angle:.2e} rad, f1-family worst \
         ||XX^T - U(-L)U^T||_F {worst_f1:.2e}·||L||_F (tolerances 1e-3)"
    );
    if worst_angle < 1e-3 && worst_f1 < 1e-3 {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 4. Line-search optimality along real trajectories
// ---------------------------------------------------------------------

/// The shift-free line restriction: integrating the step cubic gives
/// `phi(alpha) - phi(0)` (up to the f1 family's constant positive scale),
/// which orders steps identically to the objective itself but without the
/// large additive constant that would drown a 1e-10 comparison in noise.
fn grid_excess(cubic: &Cubic, alpha: f64) -> f64 {
    let lo = alpha.min(0.0) - 1.0;
    let hi = alpha.max(0.0) + 1.0;
    let mut grid_min = f64::INFINITY;
    for i in 0..=100 {
        let t = lo + (hi - lo) * (i as f64) / 100.0;
        grid_min = grid_min.min(cubic.antiderivative(t));
    }
    cubic.antiderivative(alpha) - grid_min
}

fn criterion_linesearch() -> std::result::Result<Outcome, CliError> {
    let (n, k, iters) = (120, 4, 50);
    let (g, _) = generate_sbm(n, 4, 0.4, 0.04, 1.0, 77)?;
    let a = build_shifted_operator(&g);
    let mut worst_residual = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_curv_deficit = 0.0f64;
    let mut monotone = true;
    let mut steps_checked = 0usize;

    for method in Method::ALL {
        let x0 = DenseMatrix::gaussian(n, k, 1.0 / (n as f64).sqrt(), 7);
        let mut grid = partition_1p5d(&a, &x0, 1)?;
        let mut ledger = CommLedger::new();
        let mut x = x0;
        let mut prev: Option<(DenseMatrix, DenseMatrix)> = None;
        let mut f_prev = objective(method, &a, &x);
        for _ in 0..iters {
            let step = distributed_iteration(
                method,
                &mut grid,
                &x,
                prev.as_ref().map(|(v, g)| (v, g)),
                &mut ledger,
            )?;
            match &step.steps {
                StepSizes::Global(alpha) => {
                    let cubic = cubic_global(method, &a, &x, &step.v)?;
                    worst_residual = worst_residual.max(cubic.eval(*alpha).abs());
                    worst_excess = worst_excess.max(grid_excess(&cubic, *alpha));
                    steps_checked += 1;
                }
                StepSizes::PerColumn(alphas) => {
                    let cubics = cubic_per_column(method, &a, &x, &step.v)?;
                    for (c, &alpha) in cubics.iter().zip(alphas) {
                        // A zero per-column step means the search refused the
                        // column for this round (degenerate column, or no
                        // trusted root); there is no accepted step to audit.
                        if alpha == 0.0 {
                            continue;
                        }
                        worst_residual = worst_residual.max(c.eval(alpha).abs());
                        // The bracket-grid audit belongs to the global
                        // methods, where a single scalar polynomial defines
                        // the whole step. A per-column step follows the
                        // candidate ladder instead: when the model offers a
                        // local minimum within the trusted radius, the
                        // accepted step must be one (stationary, checked
                        // above, with nonnegative curvature, checked here);
                        // when it offers any trusted root, the step must
                        // stay within the radius; only a column with far
                        // roots alone may step beyond it.
                        let in_radius: Vec<_> = solve_cubic_real(c)?
                            .into_iter()
                            .filter(|r| r.value.abs() <= ofm_core::driver::STEP_RADIUS)
                            .collect();
                        if !in_radius.is_empty() {
                            assert!(
                                alpha.abs() <= ofm_core::driver::STEP_RADIUS,
                                "far step accepted despite a trusted root"
                            );
                        }
                        if !local_minima(c, &in_radius).is_empty() {
                            let scale = c
                                .c3
                                .abs()
                                .max(c.c2.abs())
                                .max(c.c1.abs())
                                .max(c.c0.abs())
                                .max(1e-300);
                            worst_curv_deficit =
                                worst_curv_deficit.max(-c.eval_derivative(alpha) / scale);
                        }
                        steps_checked += 1;
                    }
                }
            }
            let f_next = objective(method, &a, &step.x);
            if !method.is_triangularized()
                && f_next > f_prev + 1e-9 * f_prev.abs().max(1.0)
            {
                monotone = false;
            }
            f_prev = f_next;
            x = step.x;
            prev = Some((step.v, step.g));
        }
    }
    let details = format!(
        "{steps_checked} accepted steps over {iters} iterations x 4 methods: worst \
         |cubic(alpha*)| {worst_residual:.2e} (tolerance 1e-8), worst global-step \
         excess over 101-point bracket grid {worst_excess:.2e} (tolerance 1e-10), \
         worst per-column curvature deficit {worst_curv_deficit:.2e} (tolerance \
         1e-8), plain-method descent monotone: {monotone}"
    );
    if worst_residual < 1e-8 && worst_excess <= 1e-10 && worst_curv_deficit <= 1e-8 && monotone
    {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 5. Clustering quality against the oracle features
// ---------------------------------------------------------------------

fn criterion_clustering() -> std::result::Result<Outcome, CliError> {
    let mut worst_ari = 1.0f64;
    let mut worst_gap = 0.0f64;
    for inst in fixture() {
        for (m_idx, _method) in Method::ALL.iter().enumerate() {
            let a = inst.method_ari[m_idx];
            worst_ari = worst_ari.min(a);
            worst_gap = worst_gap.max((a - inst.oracle_ari).abs());
        }
    }
    let details = format!(
        "{FIXTURE_INSTANCES} instances x 4 methods, {KMEANS_REPEATS}-repeat average: \
         lowest ARI {worst_ari:.4} (threshold 0.95), largest |ARI - ARI_oracle| \
         {worst_gap:.4} (threshold 0.05)"
    );
    if worst_ari >= 0.95 && worst_gap < 0.05 {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 6. Raw features vs Rayleigh-Ritz-recovered eigenvectors
// ---------------------------------------------------------------------

fn criterion_feature_equivalence() -> std::result::Result<Outcome, CliError> {
    let mut worst_gap = 0.0f64;
    for inst in fixture() {
        for (m_idx, _method) in Method::ALL.iter().enumerate() {
            let (x, _) = &inst.features[m_idx];
            let recovered = rayleigh_ritz(&inst.a, x)?;
            let rr_ari = repeat_ari(&recovered.vectors, &inst.truth, inst.seed ^ 0xff);
            worst_gap = worst_gap.max((inst.method_ari[m_idx] - rr_ari).abs());
        }
    }
    let details = format!(
        "{FIXTURE_INSTANCES} instances x 4 methods: largest |ARI_raw - ARI_ritz| \
         {worst_gap:.4} (threshold 0.05)"
    );
    if worst_gap < 0.05 {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 7. Streaming warm start vs cold start
// ---------------------------------------------------------------------

fn stream_config(seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "graph": {{"kind": "sbm", "n": {FIXTURE_N}, "blocks": {FIXTURE_K},
                       "p_in": {FIXTURE_P_IN}, "p_out": {FIXTURE_P_OUT}}},
            "method": "ofm-f1",
            "k": {FIXTURE_K},
            "max_iters": 2,
            "grad_tol": 1e-12,
            "seed": {seed},
            "oracle": false
        }}"#
    );
    serde_json::from_str(&text).expect("literal config")
}

fn criterion_streaming() -> std::result::Result<Outcome, CliError> {
    let trials = 10u64;
    let mut wins = 0;
    let mut summaries = Vec::new();
    for seed in 0..trials {
        let mut streamed = stream_config(seed);
        streamed.stream = Some(StreamConfig {
            parts: 10,
            mode: "edge-sampling".into(),
            iters_per_stage: 2,
        });
        let stages = run_streaming(&streamed)?;
        let final_ari = stages.last().and_then(|s| s.ari).unwrap_or(0.0);

        let mut cold = stream_config(seed);
        cold.max_iters = 20;
        let cold_ari = run_pipeline(&cold)?.ari.unwrap_or(0.0);

        if final_ari >= cold_ari - 0.05 {
            wins += 1;
        }
        summaries.push(format!("{final_ari:.2}/{cold_ari:.2}"));
    }
    let details = format!(
        "10-part stream, 2 iterations/stage vs 20-iteration cold start: within \
         0.05 on {wins}/{trials} seeds (threshold 8) [final/cold: {}]",
        summaries.join(" ")
    );
    if wins >= 8 {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 8. Distributed multiply equivalence and pinned collective cost
// ---------------------------------------------------------------------

fn criterion_spmm_equivalence() -> std::result::Result<Outcome, CliError> {
    let mut worst = 0.0f64;
    for (idx, &p) in [1usize, 4, 9, 16].iter().enumerate() {
        let n = [16usize, 45, 64, 121][idx];
        let k = 2 + idx % 3;
        let (g, _) = generate_sbm(n, 3, 0.3, 0.05, 1.0, 500 + p as u64)?;
        let a = build_shifted_operator(&g);
        let x = DenseMatrix::gaussian(n, k, 1.0, 600 + p as u64);
        let grid = partition_1p5d(&a, &x, p)?;
        let mut ledger = CommLedger::new();
        let y = spmm_1p5d(&grid, &mut ledger, Relayout::Skip);
        let y_ref = spmm_serial(&a, &x);
        let rel = y.max_abs_diff(&y_ref) / y_ref.max_abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }

    // Pinned collective charges: one multiply at p=4, N=16, k=2.
    let (g, _) = generate_sbm(16, 2, 0.5, 0.1, 1.0, 4)?;
    let a = build_shifted_operator(&g);
    let x = DenseMatrix::gaussian(16, 2, 1.0, 5);
    let grid = partition_1p5d(&a, &x, 4)?;
    let mut ledger = CommLedger::new();
    spmm_1p5d(&grid, &mut ledger, Relayout::Skip);
    let pinned_ok = ledger.latency_events == 4.0 && ledger.words_moved == 32.0;

    let details = format!(
        "p in {{1,4,9,16}}: worst relative deviation from the serial multiply \
         {worst:.2e} (tolerance 1e-12); pinned p=4,N=16,k=2 ledger = \
         ({} latency events, {} words), expected (4, 32)",
        ledger.latency_events, ledger.words_moved
    );
    if worst < 1e-12 && pinned_ok {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 9. Cost model equals the closed forms exactly
// ---------------------------------------------------------------------

fn measured_ledger(
    method: Method,
    a: &SparseSym,
    n: usize,
    k: usize,
    p: usize,
) -> std::result::Result<CommLedger, CliError> {
    let x0 = DenseMatrix::gaussian(n, k, 1.0 / (n as f64).sqrt(), 0xbe);
    let mut grid = partition_1p5d(a, &x0, p)?;
    // Warm-up to obtain a previous direction; its costs are discarded so
    // the measured iteration includes the momentum reduction.
    let mut scratch = CommLedger::new();
    let first = distributed_iteration(method, &mut grid, &x0, None, &mut scratch)?;
    let mut ledger = CommLedger::new();
    distributed_iteration(
        method,
        &mut grid,
        &first.x,
        Some((&first.v, &first.g)),
        &mut ledger,
    )?;
    Ok(ledger)
}

fn criterion_cost_model() -> std::result::Result<Outcome, CliError> {
    let mut lines = Vec::new();
    let mut all_exact = true;
    for &(n, k, p) in &[(256usize, 8usize, 4usize), (1024, 8, 16)] {
        let (g, _) = generate_sbm(n, 4, 0.05, 0.005, 1.0, 0xc0 + n as u64)?;
        let a = build_shifted_operator(&g);
        let mut ledgers = Vec::new();
        for method in Method::ALL {
            let ledger = measured_ledger(method, &a, n, k, p)?;
            let want = predict_iteration_cost(method, a.nnz(), n, k, p);
            let exact = ledger.flops == want.flops
                && ledger.latency_events == want.latency_terms
                && ledger.words_moved == want.bandwidth_words;
            all_exact &= exact;
            ledgers.push(ledger);
        }
        // The triangularized variants must cost exactly what their plain
        // siblings cost.
        let f1_same = ledgers[0] == ledgers[1];
        let f2_same = ledgers[2] == ledgers[3];
        all_exact &= f1_same && f2_same;
        lines.push(format!(
            "(N={n},k={k},p={p}): nnz={}, f1 = {:.0} flops/{} alpha/{:.0} words, \
             f2 = {:.0} flops/{} alpha/{:.0} words, family rows identical: {}",
            a.nnz(),
            ledgers[0].flops,
            ledgers[0].latency_events,
            ledgers[0].words_moved,
            ledgers[2].flops,
            ledgers[2].latency_events,
            ledgers[2].words_moved,
            f1_same && f2_same
        ));
    }
    let details = format!(
        "ledger vs closed forms bit-exact: {all_exact}; {}",
        lines.join("; ")
    );
    if all_exact {
        ok(details)
    } else {
        fail(details)
    }
}

// ---------------------------------------------------------------------
// 10. Agreement metrics vs direct formula evaluation
// ---------------------------------------------------------------------

/// ARI by brute-force pair counting — a different algorithm from the
/// library's contingency-table route, hence a genuine oracle.
fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        return 1.0; // same convention as the library: no pair disagrees
    }
    2.0 * (both * neither - only_a * only_b) / denom
}

/// NMI from the joint histogram with natural-log entropies and arithmetic
/// normalization, mirroring the library's degenerate-entropy conventions.
fn nmi_by_entropy(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint = std::collections::BTreeMap::new();
    let mut ca = std::collections::BTreeMap::new();
    let mut cb = std::collections::BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *ca.entry(x).or_insert(0.0) += 1.0;
        *cb.entry(y).or_insert(0.0) += 1.0;
    }
    let h = |counts: &std::collections::BTreeMap<usize, f64>| -> f64 {
        -counts
            .values()
            .map(|&c| {
                let p: f64 = c / n;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let (ha, hb) = (h(&ca), h(&cb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        let pxy = c / n;
        mi += pxy * (pxy / (ca[&x] / n * cb[&y] / n)).ln();
    }
    (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
}

fn criterion_metric_oracles() -> std::result::Result<Outcome, CliError> {
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut state = mix_seed(trial, 0x11ce);
        let mut next = move || splitmix::next(&mut state);
        let n = 20 + (next() % 100) as usize;
        let ka = 1 + (next() % 5) as usize;
        let kb = 1 + (next() % 5) as usize;
        let a: Vec<usize> = (0..n).map(|_| next() as usize % ka).collect();
        let b: Vec<usize> = (0..n).map(|_| next() as usize % kb).collect();
        worst = worst.max((ari(&a, &b)? - ari_by_pairs(&a, &b)).abs());
        worst = worst.max((nmi(&a, &b)? - nmi_by_entropy(&a, &b)).abs());
    }
    let pinned = (ari(&[0, 0, 1, 1], &[0, 1, 0, 1])? + 0.5).abs();
    let details = format!(
        "100 random label pairs: worst |library - direct formula| {worst:.2e} \
         (tolerance 1e-12); |ARI(split pairs) + 1/2| = {pinned:.2e}"
    );
    if worst <= 1e-12 && pinned <= 1e-12 {
        ok(details)
    } else {
        fail(details)
    }
}

/// SplitMix64 stepping for the label generator above — self-contained so
/// the oracle does not share the library's RNG plumbing.
mod splitmix {
    pub fn next(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

// ---------------------------------------------------------------------
// 11. Spectral range of constructed operators
// ---------------------------------------------------------------------

fn criterion_spectral_range() -> std::result::Result<Outcome, CliError> {
    let (lo, hi) = (-2.0 - 1e-9, 1e-9);
    let mut min_seen = 0.0f64;
    let mut max_seen = -2.0f64;
    for s in 0..50u64 {
        let n = 10 + ((s * 7) % 71) as usize;
        let blocks = 1 + (s % 5) as usize;
        let (p_in, p_out) = if s % 7 == 0 {
            (0.0, 0.0) // edgeless: isolated nodes only
        } else {
            (0.1 + 0.15 * ((s % 6) as f64), 0.02 * ((s % 4) as f64))
        };
        let (g, _) = generate_sbm(n, blocks, p_in, p_out, 1.0 + (s % 3) as f64, s)?;
        let a = build_shifted_operator(&g);
        let pairs = jacobi_eig(&a.to_dense())?;
        let lo_i = pairs.values.first().copied().unwrap_or(0.0);
        let hi_i = pairs.values.last().copied().unwrap_or(0.0);
        min_seen = min_seen.min(lo_i);
        max_seen = max_seen.max(hi_i);
        if lo_i < lo || hi_i > hi {
            return fail(format!(
                "graph seed {s} (n={n}): spectrum [{lo_i:.12}, {hi_i:.12}] leaves \
                 [-2-1e-9, 1e-9]"
            ));
        }
    }
    ok(format!(
        "50 random graphs: all dense eigenvalues within [-2-1e-9, 1e-9]; \
         extremes seen [{min_seen:.6}, {max_seen:.6}]"
    ))
}
