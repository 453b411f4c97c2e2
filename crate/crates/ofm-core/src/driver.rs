//! The iteration driver: momentum-accelerated descent with exact steps.
//!
//! One loop serves all four methods. Each iteration taken from the current
//! block `X`:
//!
//! 1. direction `G = g(X)` (reusing the sparse product from the previous
//!    update), with convergence declared when `||G||_F` drops below the
//!    relative tolerance against the starting direction norm (plus a small
//!    absolute floor so a warm start that is already stationary terminates);
//! 2. conjugate mixing `V = -G + beta V` with a per-column Polak-Ribiere
//!    coefficient, non-negativity clamped by default (the first update takes
//!    `V = -G`);
//! 3. an exact step from the closed-form cubic — one global step for the
//!    plain methods, one per column for the triangularized ones — or the
//!    caller's fixed step when the line search is disabled; per-column
//!    candidates are the model's local minima within a trusted step radius
//!    when any exist, otherwise any trusted stationary point, otherwise any
//!    root — always ranked by the objective of the actual single-column
//!    move;
//! 4. `X <- X + alpha V`, refreshing the sparse product.
//!
//! Two sparse multiplies per iteration (`A V` for the cubic, `A X` after the
//! update), everything else is `k`-width dense work. All randomness flows
//! through the caller's seed, so runs are bitwise reproducible.

use crate::dense::DenseMatrix;
use crate::error::{OfmError, Result};
use crate::graph::mix_seed;
use crate::kernels::{
    direction_from, objective_from_parts, objective_shift_free, spmm_serial, Method,
};
use crate::linesearch::{
    cubic_global_from, cubic_per_column_from, local_minima, select_step, solve_cubic_real,
    CubicRoot, StepSizes,
};
use crate::sparse::SparseSym;

/// Stationary warm starts have a zero-ish starting direction, which a purely
/// relative test can never satisfy; this floor (times `||A||_F`) lets them
/// stop immediately.
const STATIONARY_FLOOR: f64 = 1e-8;

/// Largest per-column step size the search will accept. The operator is
/// normalized so its spectrum sits in `[-2, 0]`; every well-posed single-column
/// restriction then has an `O(1)` minimizer, and a candidate root orders of
/// magnitude beyond that signals a nearly flat restriction whose far valley is
/// an artifact of the diagonal extraction, not a move worth taking. Observed
/// step sizes on healthy trajectories stay below 3; artifacts start near 60.
pub const STEP_RADIUS: f64 = 10.0;

/// Settings for one optimization run.
#[derive(Debug, Clone)]
pub struct OfmOptions {
    /// Number of feature columns.
    pub k: usize,
    /// Maximum update count.
    pub max_iters: usize,
    /// Relative tolerance on the direction norm against its starting value.
    pub grad_tol: f64,
    /// Seed for the cold-start block (and nothing else).
    pub seed: u64,
    /// Step used when `use_linesearch` is false.
    pub initial_step: f64,
    /// Exact line search (default) versus the fixed step above.
    pub use_linesearch: bool,
    /// Clamp Polak-Ribiere coefficients at zero (restart behavior).
    pub beta_clamp: bool,
}

impl OfmOptions {
    pub fn new(k: usize) -> OfmOptions {
        OfmOptions {
            k,
            max_iters: 100,
            grad_tol: 1e-2,
            seed: 0,
            initial_step: 0.1,
            use_linesearch: true,
            beta_clamp: true,
        }
    }
}

/// Outcome of a run. The histories all have length `iterations`: entry `t`
/// holds the direction norm at the iterate the `t`-th update left from, the
/// step(s) that update took, and the objective value it reached.
#[derive(Debug, Clone)]
pub struct OfmResult {
    pub method: Method,
    pub x: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub step_history: Vec<StepSizes>,
}

impl OfmResult {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_history.last().copied()
    }
}

/// Per-column Polak-Ribiere momentum coefficients:
/// `beta_j = <g - g_prev, g>_j / <g_prev, g_prev>_j`, zero when the
/// denominator underflows, clamped at zero when `clamp` is set.
pub fn momentum_betas(g: &DenseMatrix, g_prev: &DenseMatrix, clamp: bool) -> Vec<f64> {
    assert_eq!(g.n_rows(), g_prev.n_rows());
    assert_eq!(g.n_cols(), g_prev.n_cols());
    let mut betas = Vec::with_capacity(g.n_cols());
    for j in 0..g.n_cols() {
        let gc = g.col(j);
        let pc = g_prev.col(j);
        let mut num = 0.0;
        let mut den = 0.0;
        for r in 0..gc.len() {
            num += (gc[r] - pc[r]) * gc[r];
            den += pc[r] * pc[r];
        }
        let mut beta = if den < 1e-300 { 0.0 } else { num / den };
        if clamp {
            beta = beta.max(0.0);
        }
        betas.push(beta);
    }
    betas
}

/// Run from a seeded Gaussian cold start (`N(0, 1/N)` entries).
pub fn run_ofm(method: Method, a: &SparseSym, opts: &OfmOptions) -> Result<OfmResult> {
    let scale = 1.0 / (a.n() as f64).sqrt();
    let x0 = DenseMatrix::gaussian(a.n(), opts.k, scale, mix_seed(opts.seed, 0x0f_0e));
    run_ofm_from(method, a, opts, &x0)
}

/// Run from a caller-provided starting block (streaming warm starts).
pub fn run_ofm_from(
    method: Method,
    a: &SparseSym,
    opts: &OfmOptions,
    x0: &DenseMatrix,
) -> Result<OfmResult> {
    if opts.k == 0 || opts.k > a.n() {
        return Err(OfmError::InvalidArgument(format!(
            "need 1 <= k <= n, got k = {}, n = {}",
            opts.k,
            a.n()
        )));
    }
    if x0.n_rows() != a.n() || x0.n_cols() != opts.k {
        return Err(OfmError::DimensionMismatch(format!(
            "starting block is {}x{}, expected {}x{}",
            x0.n_rows(),
            x0.n_cols(),
            a.n(),
            opts.k
        )));
    }
    if !(opts.grad_tol > 0.0) {
        return Err(OfmError::InvalidArgument(format!(
            "grad_tol must be positive, got {}",
            opts.grad_tol
        )));
    }
    if !x0.all_finite() {
        return Err(OfmError::InvalidArgument(
            "starting block contains non-finite entries".into(),
        ));
    }

    let mut x = x0.clone();
    let mut w = spmm_serial(a, &x); // w tracks A x throughout
    let mut g = direction_from(method, &x, &w);
    let threshold = (opts.grad_tol * g.frobenius_norm())
        .max(STATIONARY_FLOOR * a.frobenius_norm());

    let mut v: Option<DenseMatrix> = None;
    let mut g_prev: Option<DenseMatrix> = None;
    let mut objective_history = Vec::new();
    let mut grad_norm_history = Vec::new();
    let mut step_history: Vec<StepSizes> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 0..opts.max_iters {
        let gnorm = g.frobenius_norm();
        if gnorm <= threshold {
            converged = true;
            break;
        }

        // Conjugate direction.
        let dir = match (&v, &g_prev) {
            (Some(v_old), Some(gp)) => {
                let betas = momentum_betas(&g, gp, opts.beta_clamp);
                let mut d = DenseMatrix::zeros(x.n_rows(), opts.k);
                for j in 0..opts.k {
                    d.add_scaled_col(j, betas[j], v_old);
                    d.add_scaled_col(j, -1.0, &g);
                }
                d
            }
            _ => {
                let mut d = g.clone();
                d.scale(-1.0);
                d
            }
        };

        let steps = if opts.use_linesearch {
            let av = spmm_serial(a, &dir);
            choose_steps(method, &x, &dir, &w, &av)?
        } else if method.is_triangularized() {
            StepSizes::PerColumn(vec![opts.initial_step; opts.k])
        } else {
            StepSizes::Global(opts.initial_step)
        };

        let x_before = x.clone();
        for j in 0..opts.k {
            x.add_scaled_col(j, steps.for_column(j), &dir);
        }
        let w_next = spmm_serial(a, &x);
        let g_next = direction_from(method, &x, &w_next);

        if !(x.all_finite() && w_next.all_finite() && g_next.all_finite()) {
            return Err(OfmError::Divergence {
                iteration: t,
                last_finite: Box::new(OfmResult {
                    method,
                    x: x_before,
                    iterations,
                    converged: false,
                    objective_history,
                    grad_norm_history,
                    step_history,
                }),
            });
        }

        grad_norm_history.push(gnorm);
        step_history.push(steps);
        objective_history.push(objective_from_parts(method.family(), a, &x, &w_next));
        iterations += 1;

        w = w_next;
        g_prev = Some(std::mem::replace(&mut g, g_next));
        v = Some(dir);
    }

    // The loop may exhaust max_iters with the final update having reached
    // tolerance; account for that before reporting.
    converged = converged || g.frobenius_norm() <= threshold;

    Ok(OfmResult {
        method,
        x,
        iterations,
        converged,
        objective_history,
        grad_norm_history,
        step_history,
    })
}

/// Exact step(s) along `dir`, mapping degenerate cases to a zero step.
/// Shared with the distributed engine so both take bit-identical decisions
/// given the same cached products.
///
/// Selection only considers roots where the ray restriction attains a local
/// minimum. The per-column cubics are diagonal extractions of the
/// move-every-column restriction, so a candidate root must additionally not
/// increase the objective of the update actually taken (moving that column
/// alone): near a partially converged block the extraction's cross terms can
/// fabricate a deep far-away minimum that the single-column move does not
/// have, and following it hurls the column across the landscape. A column
/// left with no acceptable root keeps a zero step for the round.
pub(crate) fn choose_steps(
    method: Method,
    x: &DenseMatrix,
    dir: &DenseMatrix,
    ax: &DenseMatrix,
    av: &DenseMatrix,
) -> Result<StepSizes> {
    if method.is_triangularized() {
        let cubics = cubic_per_column_from(method, x, dir, ax, av)?;
        let family = method.family();
        let mut steps = Vec::with_capacity(cubics.len());
        for (j, cubic) in cubics.iter().enumerate() {
            if cubic.is_zero() {
                steps.push(0.0);
                continue;
            }
            let roots = solve_cubic_real(cubic)?;
            let in_radius: Vec<CubicRoot> = roots
                .iter()
                .filter(|r| r.value.abs() <= STEP_RADIUS)
                .copied()
                .collect();
            // Candidate ladder: a trusted minimum of the model is ideal; any
            // trusted stationary point beats leaving the neighborhood; and a
            // column is never frozen outright when only far roots exist
            // (degenerate spectra make the restriction flat, pushing the
            // genuine sorting move arbitrarily far out — and an unchanged
            // block would reproduce the same cubics forever).
            let minima_near = local_minima(cubic, &in_radius);
            let candidates = if !minima_near.is_empty() {
                minima_near
            } else if !in_radius.is_empty() {
                in_radius
            } else {
                roots
            };
            // Rank candidates by the objective of the move actually taken.
            let true_phi = |t: f64| {
                let mut x_try = x.clone();
                x_try.add_scaled_col(j, t, dir);
                let mut w_try = ax.clone();
                w_try.add_scaled_col(j, t, av);
                objective_shift_free(family, &x_try, &w_try)
            };
            steps.push(select_step(&candidates, true_phi).unwrap_or(0.0));
        }
        Ok(StepSizes::PerColumn(steps))
    } else {
        match cubic_global_from(method, x, dir, ax, av) {
            Ok(cubic) => {
                let roots = solve_cubic_real(&cubic)?;
                let minima = local_minima(&cubic, &roots);
                Ok(StepSizes::Global(
                    select_step(&minima, |t| cubic.antiderivative(t)).unwrap_or(0.0),
                ))
            }
            // A fully zero direction cannot move the iterate.
            Err(OfmError::DegenerateCubic) => Ok(StepSizes::Global(0.0)),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shifted_operator, generate_sbm};
    use crate::kernels::objective;

    fn operator(seed: u64, n: usize) -> SparseSym {
        let (g, _) = generate_sbm(n, 4, 0.4, 0.05, 1.0, seed).unwrap();
        build_shifted_operator(&g)
    }

    #[test]
    fn histories_share_length_with_iterations() {
        let a = operator(1, 60);
        let mut opts = OfmOptions::new(4);
        opts.max_iters = 25;
        opts.grad_tol = 1e-12; // force the full budget
        for method in Method::ALL {
            let r = run_ofm(method, &a, &opts).unwrap();
            assert_eq!(r.iterations, 25, "{method}");
            assert_eq!(r.objective_history.len(), 25);
            assert_eq!(r.grad_norm_history.len(), 25);
            assert_eq!(r.step_history.len(), 25);
        }
    }

    #[test]
    fn plain_methods_descend_monotonically() {
        let a = operator(3, 80);
        let mut opts = OfmOptions::new(4);
        opts.max_iters = 50;
        opts.grad_tol = 1e-14;
        for method in [Method::OfmF1, Method::OfmF2] {
            let r = run_ofm(method, &a, &opts).unwrap();
            let f0 = objective(
                method,
                &a,
                &DenseMatrix::gaussian(80, 4, 1.0 / 80f64.sqrt(), mix_seed(opts.seed, 0x0f_0e)),
            );
            let mut prev = f0;
            for (t, &f) in r.objective_history.iter().enumerate() {
                assert!(
                    f <= prev + 1e-9 * prev.abs().max(1.0),
                    "{method} iteration {t}: {f} > {prev}"
                );
                prev = f;
            }
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let a = operator(5, 50);
        let mut opts = OfmOptions::new(3);
        opts.max_iters = 20;
        opts.seed = 99;
        for method in Method::ALL {
            let r1 = run_ofm(method, &a, &opts).unwrap();
            let r2 = run_ofm(method, &a, &opts).unwrap();
            assert_eq!(r1.x, r2.x, "{method}");
            assert_eq!(r1.objective_history, r2.objective_history);
            assert_eq!(r1.grad_norm_history, r2.grad_norm_history);
            assert_eq!(r1.step_history, r2.step_history);
        }
    }

    #[test]
    fn converges_and_restarting_from_solution_stops_immediately() {
        let a = operator(7, 60);
        let mut opts = OfmOptions::new(4);
        opts.max_iters = 800;
        // Push the relative criterion below the stationarity floor so both
        // runs answer to the same absolute threshold.
        opts.grad_tol = 1e-16;
        for method in Method::ALL {
            let r = run_ofm(method, &a, &opts).unwrap();
            assert!(r.converged, "{method} did not converge");
            assert!(r.iterations < 800);
            // Warm start at the solution: the direction norm already sits
            // under the floor, so no update should happen.
            let again = run_ofm_from(method, &a, &opts, &r.x).unwrap();
            assert!(again.converged, "{method} warm restart");
            assert!(
                again.iterations <= 2,
                "{method} warm restart took {} iterations",
                again.iterations
            );
            assert!(again.x.max_abs_diff(&r.x) < 1e-6);
        }
    }

    #[test]
    fn fixed_step_mode_descends_with_small_steps() {
        let a = operator(9, 50);
        let mut opts = OfmOptions::new(3);
        opts.max_iters = 40;
        opts.grad_tol = 1e-14;
        opts.use_linesearch = false;
        opts.initial_step = 0.05;
        for method in Method::ALL {
            let r = run_ofm(method, &a, &opts).unwrap();
            let first = r.objective_history.first().unwrap();
            let last = r.objective_history.last().unwrap();
            assert!(last < first, "{method}: {last} !< {first}");
            match (&r.step_history[0], method.is_triangularized()) {
                (StepSizes::Global(s), false) => assert_eq!(*s, 0.05),
                (StepSizes::PerColumn(v), true) => {
                    assert!(v.iter().all(|&s| s == 0.05))
                }
                other => panic!("{method}: unexpected step shape {other:?}"),
            }
        }
    }

    #[test]
    fn oversized_fixed_step_reports_divergence_with_last_state() {
        let a = operator(11, 40);
        let mut opts = OfmOptions::new(3);
        opts.max_iters = 50;
        opts.use_linesearch = false;
        opts.initial_step = 1e3;
        match run_ofm(Method::OfmF1, &a, &opts) {
            Err(OfmError::Divergence { iteration, last_finite }) => {
                assert!(iteration < 50);
                assert!(last_finite.x.all_finite());
                assert_eq!(last_finite.iterations, last_finite.objective_history.len());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn momentum_betas_match_norm_ratio_for_orthogonal_directions() {
        // Columns of g orthogonal to g_prev: beta = ||g||^2 / ||g_prev||^2.
        let mut g_prev = DenseMatrix::zeros(4, 2);
        g_prev.set(0, 0, 2.0);
        g_prev.set(1, 1, 1.0);
        let mut g = DenseMatrix::zeros(4, 2);
        g.set(2, 0, 3.0);
        g.set(3, 1, 5.0);
        let betas = momentum_betas(&g, &g_prev, true);
        assert_eq!(betas, vec![9.0 / 4.0, 25.0]);
    }

    #[test]
    fn momentum_betas_clamp_and_zero_denominator() {
        let mut g_prev = DenseMatrix::zeros(3, 2);
        g_prev.set(0, 0, 1.0);
        // Column 1 of g_prev is zero: denominator underflow maps to zero.
        let mut g = DenseMatrix::zeros(3, 2);
        g.set(0, 0, 0.5);
        g.set(1, 1, 1.0);
        let clamped = momentum_betas(&g, &g_prev, true);
        assert_eq!(clamped, vec![0.0, 0.0]);
        let raw = momentum_betas(&g, &g_prev, false);
        assert_eq!(raw, vec![(0.5 - 1.0) * 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = operator(13, 20);
        let opts = OfmOptions::new(0);
        assert!(run_ofm(Method::OfmF1, &a, &opts).is_err());
        let opts = OfmOptions::new(25);
        assert!(run_ofm(Method::OfmF1, &a, &opts).is_err());
        let mut opts = OfmOptions::new(2);
        opts.grad_tol = 0.0;
        assert!(run_ofm(Method::OfmF1, &a, &opts).is_err());
        let opts = OfmOptions::new(2);
        let wrong = DenseMatrix::zeros(20, 3);
        assert!(run_ofm_from(Method::OfmF1, &a, &opts, &wrong).is_err());
    }
}
