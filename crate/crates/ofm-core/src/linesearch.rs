//! Exact line search along an update direction.
//!
//! For every method the objective restricted to a ray, `phi(alpha) =
//! f(X + alpha V)`, is a quartic whose derivative is a cubic with
//! coefficients assembled from eight small Gram products: `X^T X`, `X^T V`,
//! `V^T V`, `V^T A X`, `X^T A X`, `X^T A V`, `V^T A V`, and transposes
//! thereof. Both sparse products (`A X`, `A V`) are taken as inputs, so one
//! driver iteration costs exactly two sparse multiplies regardless of how
//! often the cubic is evaluated.
//!
//! The plain methods get one global cubic; the triangularized methods get
//! one cubic per column `i`, equal to the `i`-th diagonal entry of
//! `V^T g(X + alpha V)` expanded in powers of `alpha`. Roots come from the
//! closed-form cubic formula (trigonometric branch when all three roots are
//! real) plus one guarded Newton polish.
//!
//! Scaling note: for family one the stored cubic is `phi'(alpha) / 4` — the
//! common factor 4 of the gradient is dropped — while for family two it is
//! `phi'(alpha)` itself. Roots and the selected step are unaffected.

use crate::dense::DenseMatrix;
use crate::error::{OfmError, Result};
use crate::kernels::{spmm_serial, Method};
use crate::sparse::SparseSym;

/// `c3 a^3 + c2 a^2 + c1 a + c0`, the derivative of the ray restriction
/// (up to a positive constant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl Cubic {
    pub fn eval(&self, a: f64) -> f64 {
        ((self.c3 * a + self.c2) * a + self.c1) * a + self.c0
    }

    pub fn eval_derivative(&self, a: f64) -> f64 {
        (3.0 * self.c3 * a + 2.0 * self.c2) * a + self.c1
    }

    /// Antiderivative with zero constant term: a quartic sharing the shape of
    /// the objective along the ray, used to rank candidate steps.
    pub fn antiderivative(&self, a: f64) -> f64 {
        (((self.c3 / 4.0 * a + self.c2 / 3.0) * a + self.c1 / 2.0) * a + self.c0) * a
    }

    /// All four coefficients exactly zero: the direction does not move the
    /// objective (zero column), and the step is defined as zero.
    pub fn is_zero(&self) -> bool {
        self.c3 == 0.0 && self.c2 == 0.0 && self.c1 == 0.0 && self.c0 == 0.0
    }
}

/// A real root with its algebraic multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoot {
    pub value: f64,
    pub multiplicity: usize,
}

/// Step sizes chosen by one line-search round.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSizes {
    /// One step shared by every column (plain methods).
    Global(f64),
    /// Independent step per column (triangularized methods).
    PerColumn(Vec<f64>),
}

impl StepSizes {
    pub fn for_column(&self, j: usize) -> f64 {
        match self {
            StepSizes::Global(a) => *a,
            StepSizes::PerColumn(v) => v[j],
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            StepSizes::Global(a) => a.abs(),
            StepSizes::PerColumn(v) => v.iter().fold(0.0, |m, a| m.max(a.abs())),
        }
    }
}

/// Gram products shared by the global and per-column assemblies.
struct Grams {
    xtx: DenseMatrix,
    xtv: DenseMatrix,
    vtx: DenseMatrix,
    vtv: DenseMatrix,
    vtax: DenseMatrix,
    xtax: DenseMatrix,
    xtav: DenseMatrix,
    vtav: DenseMatrix,
}

impl Grams {
    fn build(x: &DenseMatrix, v: &DenseMatrix, ax: &DenseMatrix, av: &DenseMatrix) -> Grams {
        let xtv = x.transpose_times(v);
        let vtax = v.transpose_times(ax);
        Grams {
            xtx: x.transpose_times(x),
            vtx: xtv.transpose(),
            xtv,
            vtv: v.transpose_times(v),
            xtax: x.transpose_times(ax),
            // A is symmetric, so X^T A V is the transpose of V^T A X; reusing
            // it keeps the product count at what two sparse multiplies allow.
            xtav: vtax.transpose(),
            vtax,
            vtav: v.transpose_times(av),
        }
    }
}

/// Diagonal entry `i` of `P * triu(Q)`:  sum over `j <= i` of
/// `P[i, j] Q[j, i]`.
fn diag_prod_triu(p: &DenseMatrix, q: &DenseMatrix, i: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..=i {
        acc += p.get(i, j) * q.get(j, i);
    }
    acc
}

fn check_shapes(x: &DenseMatrix, v: &DenseMatrix) -> Result<()> {
    if x.n_rows() != v.n_rows() || x.n_cols() != v.n_cols() {
        return Err(OfmError::DimensionMismatch(format!(
            "x is {}x{} but v is {}x{}",
            x.n_rows(),
            x.n_cols(),
            v.n_rows(),
            v.n_cols()
        )));
    }
    Ok(())
}

/// Derivative cubic for the plain methods, computing both sparse products.
pub fn cubic_global(
    method: Method,
    a: &SparseSym,
    x: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<Cubic> {
    let ax = spmm_serial(a, x);
    let av = spmm_serial(a, v);
    cubic_global_from(method, x, v, &ax, &av)
}

/// Derivative cubic for the plain methods from cached `ax = A X`,
/// `av = A V`. A zero direction is rejected as degenerate.
pub fn cubic_global_from(
    method: Method,
    x: &DenseMatrix,
    v: &DenseMatrix,
    ax: &DenseMatrix,
    av: &DenseMatrix,
) -> Result<Cubic> {
    check_shapes(x, v)?;
    if method.is_triangularized() {
        return Err(OfmError::InvalidArgument(format!(
            "{method} takes per-column cubics, not a global one"
        )));
    }
    if v.max_abs() == 0.0 {
        return Err(OfmError::DegenerateCubic);
    }
    let g = Grams::build(x, v, ax, av);
    let cubic = match method {
        Method::OfmF1 => Cubic {
            c3: g.vtv.trace_product(&g.vtv),
            c2: 3.0 * g.vtv.trace_product(&g.xtv),
            c1: g.vtav.trace()
                + g.vtx.trace_product(&g.vtx)
                + g.vtx.trace_product(&g.xtv)
                + g.vtv.trace_product(&g.xtx),
            c0: g.vtax.trace() + g.vtx.trace_product(&g.xtx),
        },
        Method::OfmF2 => Cubic {
            c3: -4.0 * g.vtv.trace_product(&g.vtav),
            c2: -6.0 * (g.vtx.trace_product(&g.vtav) + g.vtv.trace_product(&g.vtax)),
            c1: 2.0
                * (2.0 * g.vtav.trace()
                    - 2.0 * g.vtx.trace_product(&g.xtav)
                    - 2.0 * g.vtx.trace_product(&g.vtax)
                    - g.vtv.trace_product(&g.xtax)
                    - g.xtx.trace_product(&g.vtav)),
            c0: 2.0
                * (2.0 * g.vtax.trace()
                    - g.vtx.trace_product(&g.xtax)
                    - g.xtx.trace_product(&g.vtax)),
        },
        _ => unreachable!(),
    };
    Ok(cubic)
}

/// Per-column derivative cubics for the triangularized methods.
pub fn cubic_per_column(
    method: Method,
    a: &SparseSym,
    x: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<Vec<Cubic>> {
    let ax = spmm_serial(a, x);
    let av = spmm_serial(a, v);
    cubic_per_column_from(method, x, v, &ax, &av)
}

/// Per-column cubics from cached sparse products. Column `i`'s cubic is the
/// expansion of `[V^T g(X + alpha V)]_{ii}`; an all-zero column yields the
/// all-zero cubic, which downstream step selection maps to a zero step.
pub fn cubic_per_column_from(
    method: Method,
    x: &DenseMatrix,
    v: &DenseMatrix,
    ax: &DenseMatrix,
    av: &DenseMatrix,
) -> Result<Vec<Cubic>> {
    check_shapes(x, v)?;
    if !method.is_triangularized() {
        return Err(OfmError::InvalidArgument(format!(
            "{method} takes a global cubic, not per-column ones"
        )));
    }
    let g = Grams::build(x, v, ax, av);
    let k = x.n_cols();
    let dpt = diag_prod_triu;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let cubic = match method {
            Method::TriOfmF1 => Cubic {
                c3: dpt(&g.vtv, &g.vtv, i),
                c2: dpt(&g.vtx, &g.vtv, i) + dpt(&g.vtv, &g.xtv, i) + dpt(&g.vtv, &g.vtx, i),
                c1: g.vtav.get(i, i)
                    + dpt(&g.vtx, &g.vtx, i)
                    + dpt(&g.vtx, &g.xtv, i)
                    + dpt(&g.vtv, &g.xtx, i),
                c0: g.vtax.get(i, i) + dpt(&g.vtx, &g.xtx, i),
            },
            Method::TriOfmF2 => Cubic {
                c3: -(dpt(&g.vtav, &g.vtv, i) + dpt(&g.vtv, &g.vtav, i)),
                c2: -(dpt(&g.vtax, &g.vtv, i)
                    + dpt(&g.vtav, &g.xtv, i)
                    + dpt(&g.vtav, &g.vtx, i)
                    + dpt(&g.vtx, &g.vtav, i)
                    + dpt(&g.vtv, &g.xtav, i)
                    + dpt(&g.vtv, &g.vtax, i)),
                c1: 2.0 * g.vtav.get(i, i)
                    - dpt(&g.vtax, &g.xtv, i)
                    - dpt(&g.vtax, &g.vtx, i)
                    - dpt(&g.vtav, &g.xtx, i)
                    - dpt(&g.vtx, &g.xtav, i)
                    - dpt(&g.vtx, &g.vtax, i)
                    - dpt(&g.vtv, &g.xtax, i),
                c0: 2.0 * g.vtax.get(i, i)
                    - dpt(&g.vtax, &g.xtx, i)
                    - dpt(&g.vtx, &g.xtax, i),
            },
            _ => unreachable!(),
        };
        out.push(cubic);
    }
    Ok(out)
}

/// All real roots with multiplicity, ascending.
///
/// Degrades gracefully when the leading coefficients vanish (quadratic, then
/// linear). Classification of the three-real versus one-real case uses the
/// discriminant of the depressed cubic with a relative tolerance, and every
/// simple root receives one guarded Newton polish on the original
/// coefficients. A cubic that is identically zero is an error; a nonzero
/// constant has no roots and returns the empty list.
pub fn solve_cubic_real(c: &Cubic) -> Result<Vec<CubicRoot>> {
    if c.is_zero() {
        return Err(OfmError::DegenerateCubic);
    }
    let coeff_scale = c.c3.abs().max(c.c2.abs()).max(c.c1.abs()).max(c.c0.abs());
    let negligible = |x: f64| x.abs() <= 1e-14 * coeff_scale;

    let mut roots: Vec<CubicRoot> = if negligible(c.c3) {
        // Quadratic (or lower) fallback.
        if negligible(c.c2) {
            if negligible(c.c1) {
                Vec::new() // nonzero constant: no roots
            } else {
                vec![CubicRoot { value: -c.c0 / c.c1, multiplicity: 1 }]
            }
        } else {
            let disc = c.c1 * c.c1 - 4.0 * c.c2 * c.c0;
            let scale = (c.c1 * c.c1).max((4.0 * c.c2 * c.c0).abs()).max(f64::MIN_POSITIVE);
            if disc.abs() <= 1e-12 * scale {
                vec![CubicRoot { value: -c.c1 / (2.0 * c.c2), multiplicity: 2 }]
            } else if disc < 0.0 {
                Vec::new()
            } else {
                let sq = disc.sqrt();
                // Stable quadratic roots via the sign-matched form.
                let qq = -0.5 * (c.c1 + c.c1.signum() * sq);
                let (r1, r2) = if c.c1 == 0.0 {
                    let r = sq / (2.0 * c.c2);
                    (-r, r)
                } else {
                    (qq / c.c2, c.c0 / qq)
                };
                vec![
                    CubicRoot { value: r1.min(r2), multiplicity: 1 },
                    CubicRoot { value: r1.max(r2), multiplicity: 1 },
                ]
            }
        }
    } else {
        // Depressed form t^3 + p t + q with alpha = t - b/3.
        let b = c.c2 / c.c3;
        let cc = c.c1 / c.c3;
        let d = c.c0 / c.c3;
        let p = cc - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * cc / 3.0 + d;
        let shift = -b / 3.0;
        let disc = -4.0 * p * p * p - 27.0 * q * q;
        let disc_scale = (4.0 * p.abs().powi(3)).max(27.0 * q * q).max(f64::MIN_POSITIVE);

        if disc.abs() <= 1e-10 * disc_scale {
            if p.abs() <= 1e-12 && q.abs() <= 1e-12 {
                vec![CubicRoot { value: shift, multiplicity: 3 }]
            } else {
                // One double root and one simple root.
                let double = -3.0 * q / (2.0 * p) + shift;
                let single = 3.0 * q / p + shift;
                let mut v = vec![
                    CubicRoot { value: double, multiplicity: 2 },
                    CubicRoot { value: single, multiplicity: 1 },
                ];
                v.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
                v
            }
        } else if disc > 0.0 {
            // Three distinct real roots: trigonometric branch.
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt();
            let theta = arg.clamp(-1.0, 1.0).acos();
            let mut v: Vec<CubicRoot> = (0..3)
                .map(|j| CubicRoot {
                    value: m * ((theta - 2.0 * std::f64::consts::PI * j as f64) / 3.0).cos()
                        + shift,
                    multiplicity: 1,
                })
                .collect();
            v.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
            v
        } else {
            // One real root: Cardano with sign-stable cube roots.
            let t = if q == 0.0 {
                0.0 // p > 0 here, so t (t^2 + p) has only the origin
            } else {
                let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
                let u = (-q / 2.0 - q.signum() * s).cbrt();
                if u == 0.0 {
                    (-q).cbrt()
                } else {
                    u - p / (3.0 * u)
                }
            };
            vec![CubicRoot { value: t + shift, multiplicity: 1 }]
        }
    };

    // One Newton step per simple root, kept only when it reduces the residual.
    for r in roots.iter_mut() {
        if r.multiplicity != 1 {
            continue;
        }
        let deriv = c.eval_derivative(r.value);
        if deriv.abs() > 1e-14 * coeff_scale.max(1.0) {
            let polished = r.value - c.eval(r.value) / deriv;
            if polished.is_finite() && c.eval(polished).abs() <= c.eval(r.value).abs() {
                r.value = polished;
            }
        }
    }
    roots.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(roots)
}

/// Critical points at which the ray restriction actually attains a local
/// minimum.
///
/// The quartic restriction opens upward whenever the leading cubic
/// coefficient is positive — always true for the f1 family and for the global
/// f2 cubic on a negative-semidefinite operator — and then every selection
/// rule below operates on minima as intended. The per-column f2 cubics carry
/// sign-indefinite cross terms, though, and near a partially converged block
/// a column's restriction can open *downward*: its lone real root is then the
/// restriction's maximum, sometimes at an enormous step that would hurl the
/// column across the landscape. Filtering to genuine minima (simple roots
/// where the cubic's slope is nonnegative, triple roots of an upward cubic)
/// lets the caller refuse to move such a column instead; double roots are
/// saddles and never qualify. Slopes are taken against the same effective
/// polynomial the solver used, so quadratic/linear fallback roots are
/// classified consistently.
pub fn local_minima(c: &Cubic, roots: &[CubicRoot]) -> Vec<CubicRoot> {
    let coeff_scale = c.c3.abs().max(c.c2.abs()).max(c.c1.abs()).max(c.c0.abs());
    let c3 = if c.c3.abs() > 1e-14 * coeff_scale { c.c3 } else { 0.0 };
    let c2 = if c.c2.abs() > 1e-14 * coeff_scale { c.c2 } else { 0.0 };
    let slope = |a: f64| (3.0 * c3 * a + 2.0 * c2) * a + c.c1;
    roots
        .iter()
        .filter(|r| match r.multiplicity {
            1 => slope(r.value) >= 0.0,
            3 => c3 > 0.0,
            _ => false,
        })
        .copied()
        .collect()
}

/// Pick the step among the critical points of the ray restriction.
///
/// One real root is taken as-is (the quartic's only minimizer). With a double
/// plus a simple root, the simple root is the minimizer. With three distinct
/// roots the outer two are minima; `phi` breaks the tie, then smaller
/// magnitude, then smaller value. Returns `None` for an empty root list.
pub fn select_step(roots: &[CubicRoot], mut phi: impl FnMut(f64) -> f64) -> Option<f64> {
    match roots.len() {
        0 => None,
        1 => Some(roots[0].value),
        2 if roots[0].multiplicity != roots[1].multiplicity => roots
            .iter()
            .find(|r| r.multiplicity == 1)
            .map(|r| r.value),
        _ => {
            let values: Vec<f64> = roots.iter().map(|r| phi(r.value)).collect();
            let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = 1e-12 * (1.0 + best.abs());
            roots
                .iter()
                .zip(&values)
                .filter(|(_, &v)| v <= best + tol)
                .map(|(r, _)| r.value)
                .min_by(|a, b| {
                    (a.abs(), *a)
                        .partial_cmp(&(b.abs(), *b))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shifted_operator, generate_sbm};
    use crate::kernels::{dir_g1, dir_g2, objective};

    fn instance(seed: u64, n: usize, k: usize) -> (SparseSym, DenseMatrix, DenseMatrix) {
        let (g, _) = generate_sbm(n, 2, 0.4, 0.1, 1.0, seed).unwrap();
        let a = build_shifted_operator(&g);
        let x = DenseMatrix::gaussian(n, k, 1.0 / (n as f64).sqrt(), seed + 1);
        let v = DenseMatrix::gaussian(n, k, 1.0 / (n as f64).sqrt(), seed + 2);
        (a, x, v)
    }

    #[test]
    fn solves_three_distinct_roots() {
        // (a + 1) a (a - 1) = a^3 - a
        let roots = solve_cubic_real(&Cubic { c3: 1.0, c2: 0.0, c1: -1.0, c0: 0.0 }).unwrap();
        assert_eq!(roots.len(), 3);
        let vals: Vec<f64> = roots.iter().map(|r| r.value).collect();
        for (got, want) in vals.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(roots.iter().all(|r| r.multiplicity == 1));
    }

    #[test]
    fn solves_double_plus_single_root() {
        // (a - 1)^2 (a + 2) = a^3 - 3a + 2
        let roots = solve_cubic_real(&Cubic { c3: 1.0, c2: 0.0, c1: -3.0, c0: 2.0 }).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].value + 2.0).abs() < 1e-9);
        assert_eq!(roots[0].multiplicity, 1);
        assert!((roots[1].value - 1.0).abs() < 1e-9);
        assert_eq!(roots[1].multiplicity, 2);
    }

    #[test]
    fn solves_triple_root() {
        // (a - 2)^3 = a^3 - 6a^2 + 12a - 8
        let roots = solve_cubic_real(&Cubic { c3: 1.0, c2: -6.0, c1: 12.0, c0: -8.0 }).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 3);
        assert!((roots[0].value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn solves_single_real_root() {
        // a^3 - 2: lone real root at cbrt(2)
        let roots = solve_cubic_real(&Cubic { c3: 1.0, c2: 0.0, c1: 0.0, c0: -2.0 }).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].value - 2.0_f64.cbrt()).abs() < 1e-13);
        // a^3 + a: only the origin
        let roots = solve_cubic_real(&Cubic { c3: 1.0, c2: 0.0, c1: 1.0, c0: 0.0 }).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].value, 0.0);
    }

    #[test]
    fn falls_back_to_quadratic_and_linear() {
        let roots = solve_cubic_real(&Cubic { c3: 0.0, c2: 1.0, c1: -3.0, c0: 2.0 }).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].value - 1.0).abs() < 1e-12);
        assert!((roots[1].value - 2.0).abs() < 1e-12);

        let roots = solve_cubic_real(&Cubic { c3: 0.0, c2: 0.0, c1: 2.0, c0: -5.0 }).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].value - 2.5).abs() < 1e-14);

        assert!(matches!(
            solve_cubic_real(&Cubic { c3: 0.0, c2: 0.0, c1: 0.0, c0: 0.0 }),
            Err(OfmError::DegenerateCubic)
        ));
    }

    #[test]
    fn local_minima_keeps_upward_shapes_and_prunes_downward_ones() {
        // Upward quartic, three roots: the outer two are minima, the middle
        // is the maximum.
        let up = Cubic { c3: 1.0, c2: 0.0, c1: -1.0, c0: 0.0 };
        let kept = local_minima(&up, &solve_cubic_real(&up).unwrap());
        let vals: Vec<f64> = kept.iter().map(|r| r.value).collect();
        assert_eq!(vals.len(), 2);
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);

        // Downward quartic, three roots: only the middle survives.
        let down = Cubic { c3: -1.0, c2: 0.0, c1: 1.0, c0: 0.0 };
        let kept = local_minima(&down, &solve_cubic_real(&down).unwrap());
        assert_eq!(kept.len(), 1);
        assert!(kept[0].value.abs() < 1e-12);

        // Downward quartic with a single real root: that root is the
        // restriction's maximum, so nothing qualifies.
        let lone_max = Cubic { c3: -1.0, c2: 0.0, c1: -1.0, c0: 2.0 };
        let roots = solve_cubic_real(&lone_max).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(local_minima(&lone_max, &roots).is_empty());

        // Upward double-plus-single: the simple root is the minimum, the
        // double root is a saddle.
        let mixed = Cubic { c3: 1.0, c2: 0.0, c1: -3.0, c0: 2.0 };
        let kept = local_minima(&mixed, &solve_cubic_real(&mixed).unwrap());
        assert_eq!(kept.len(), 1);
        assert!((kept[0].value + 2.0).abs() < 1e-9);

        // Triple roots follow the opening direction.
        let tri_up = Cubic { c3: 1.0, c2: -6.0, c1: 12.0, c0: -8.0 };
        assert_eq!(local_minima(&tri_up, &solve_cubic_real(&tri_up).unwrap()).len(), 1);
        let tri_down = Cubic { c3: -1.0, c2: 6.0, c1: -12.0, c0: 8.0 };
        assert!(local_minima(&tri_down, &solve_cubic_real(&tri_down).unwrap()).is_empty());

        // Quadratic fallback (negligible c3): slope classification uses the
        // effective polynomial, keeping the parabola's descending-to-rising
        // crossing and dropping the other.
        let quad = Cubic { c3: 0.0, c2: 1.0, c1: -3.0, c0: 2.0 };
        let kept = local_minima(&quad, &solve_cubic_real(&quad).unwrap());
        assert_eq!(kept.len(), 1);
        assert!((kept[0].value - 2.0).abs() < 1e-12);

        // Linear fallback: a positive slope is a minimum, a negative one is
        // a maximum.
        let lin_min = Cubic { c3: 0.0, c2: 0.0, c1: 2.0, c0: -5.0 };
        assert_eq!(local_minima(&lin_min, &solve_cubic_real(&lin_min).unwrap()).len(), 1);
        let lin_max = Cubic { c3: 0.0, c2: 0.0, c1: -2.0, c0: 5.0 };
        assert!(local_minima(&lin_max, &solve_cubic_real(&lin_max).unwrap()).is_empty());
    }

    #[test]
    fn select_step_prefers_single_root_then_phi_then_magnitude() {
        let single = [CubicRoot { value: 3.0, multiplicity: 1 }];
        assert_eq!(select_step(&single, |_| 0.0), Some(3.0));

        let mixed = [
            CubicRoot { value: -2.0, multiplicity: 1 },
            CubicRoot { value: 1.0, multiplicity: 2 },
        ];
        assert_eq!(select_step(&mixed, |_| 0.0), Some(-2.0));

        // Symmetric quartic: minima at -1 and 1 tie, so the smaller-magnitude
        // rule falls through to the smaller value.
        let c = Cubic { c3: 1.0, c2: 0.0, c1: -1.0, c0: 0.0 };
        let roots = solve_cubic_real(&c).unwrap();
        let picked = select_step(&roots, |a| c.antiderivative(a)).unwrap();
        assert!((picked + 1.0).abs() < 1e-12);

        // Asymmetric: phi decides.
        let c = Cubic { c3: 1.0, c2: 0.3, c1: -1.0, c0: 0.0 };
        let roots = solve_cubic_real(&c).unwrap();
        let picked = select_step(&roots, |a| c.antiderivative(a)).unwrap();
        let phis: Vec<f64> = roots.iter().map(|r| c.antiderivative(r.value)).collect();
        let best = phis.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((c.antiderivative(picked) - best).abs() < 1e-12);

        assert_eq!(select_step(&[], |_| 0.0), None);
    }

    #[test]
    fn global_cubic_f1_matches_objective_derivative() {
        // The stored cubic is a quarter of the true derivative; compare
        // against central differences of the actual objective.
        let (a, x, v) = instance(31, 40, 3);
        let cubic = cubic_global(Method::OfmF1, &a, &x, &v).unwrap();
        let h = 1e-6;
        for &alpha in &[-0.6, -0.1, 0.0, 0.2, 0.9] {
            let f = |t: f64| {
                let mut y = x.clone();
                y.add_scaled(t, &v);
                objective(Method::OfmF1, &a, &y)
            };
            let fd = (f(alpha + h) - f(alpha - h)) / (2.0 * h);
            let analytic = 4.0 * cubic.eval(alpha);
            assert!(
                (analytic - fd).abs() < 1e-5 * fd.abs().max(1.0),
                "alpha {alpha}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn global_cubic_f2_matches_objective_derivative() {
        let (a, x, v) = instance(33, 40, 3);
        let cubic = cubic_global(Method::OfmF2, &a, &x, &v).unwrap();
        let h = 1e-6;
        for &alpha in &[-0.6, -0.1, 0.0, 0.2, 0.9] {
            let f = |t: f64| {
                let mut y = x.clone();
                y.add_scaled(t, &v);
                objective(Method::OfmF2, &a, &y)
            };
            let fd = (f(alpha + h) - f(alpha - h)) / (2.0 * h);
            let analytic = cubic.eval(alpha);
            assert!(
                (analytic - fd).abs() < 1e-5 * fd.abs().max(1.0),
                "alpha {alpha}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn per_column_cubics_match_direction_diagonal() {
        // Column i's cubic must equal [V^T g(X + alpha V)]_{ii} exactly (up
        // to rounding), for both triangularized methods.
        let (a, x, v) = instance(35, 40, 4);
        for method in [Method::TriOfmF1, Method::TriOfmF2] {
            let cubics = cubic_per_column(method, &a, &x, &v).unwrap();
            for &alpha in &[-0.4, 0.0, 0.3, 1.1] {
                let mut y = x.clone();
                y.add_scaled(alpha, &v);
                let gy = match method {
                    Method::TriOfmF1 => dir_g1(&a, &y),
                    Method::TriOfmF2 => dir_g2(&a, &y),
                    _ => unreachable!(),
                };
                let vtg = v.transpose_times(&gy);
                for i in 0..4 {
                    let want = vtg.get(i, i);
                    let got = cubics[i].eval(alpha);
                    assert!(
                        (got - want).abs() < 1e-11 * want.abs().max(1.0),
                        "{method} col {i} alpha {alpha}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn single_column_reduces_to_global_cubic() {
        let (a, x, v) = instance(37, 40, 1);
        let per = cubic_per_column(Method::TriOfmF1, &a, &x, &v).unwrap();
        let global = cubic_global(Method::OfmF1, &a, &x, &v).unwrap();
        assert_eq!(per[0], global);

        let per2 = cubic_per_column(Method::TriOfmF2, &a, &x, &v).unwrap();
        let global2 = cubic_global(Method::OfmF2, &a, &x, &v).unwrap();
        for (got, want) in [
            (per2[0].c3, global2.c3 / 2.0),
            (per2[0].c2, global2.c2 / 2.0),
            (per2[0].c1, global2.c1 / 2.0),
            (per2[0].c0, global2.c0 / 2.0),
        ] {
            assert!((got - want).abs() < 1e-12 * want.abs().max(1e-12), "{got} vs {want}");
        }
    }

    #[test]
    fn zero_direction_is_degenerate_globally_and_per_column() {
        let (a, x, _) = instance(39, 30, 3);
        let zero = DenseMatrix::zeros(30, 3);
        assert!(matches!(
            cubic_global(Method::OfmF1, &a, &x, &zero),
            Err(OfmError::DegenerateCubic)
        ));
        // A single zero column is not an error: its cubic is identically zero.
        let mut v = DenseMatrix::gaussian(30, 3, 1.0, 40);
        v.col_mut(1).fill(0.0);
        let cubics = cubic_per_column(Method::TriOfmF1, &a, &x, &v).unwrap();
        assert!(!cubics[0].is_zero());
        assert!(cubics[1].is_zero());
        assert!(!cubics[2].is_zero());
    }

    #[test]
    fn selected_step_never_increases_the_objective() {
        for seed in [41, 43, 45, 47] {
            let (a, x, v) = instance(seed, 36, 3);
            for method in [Method::OfmF1, Method::OfmF2] {
                let cubic = cubic_global(method, &a, &x, &v).unwrap();
                let roots = solve_cubic_real(&cubic).unwrap();
                let alpha = select_step(&roots, |t| cubic.antiderivative(t)).unwrap();
                let mut y = x.clone();
                y.add_scaled(alpha, &v);
                let before = objective(method, &a, &x);
                let after = objective(method, &a, &y);
                assert!(
                    after <= before + 1e-10 * before.abs().max(1.0),
                    "{method} seed {seed}: {after} > {before}"
                );
            }
        }
    }
}
