//! Simulated 1.5D communication-avoiding distribution of the iteration.
//!
//! The sparse operator is laid out on a `sqrt(p) x sqrt(p)` process grid
//! and never moves; the dense panels travel instead. Process `(i, j)` owns
//! the sparse block `A[i, j]`, the dense input block `X[j sqrt(p) + i]`, and
//! the dense output block `Y[i sqrt(p) + j]`. One multiply is: allgather the
//! input blocks up each grid column, multiply the local sparse block, then
//! reduce-scatter partial results across each grid row (partials combined in
//! ascending process order). Because the output lands transposed relative to
//! the input layout, restoring the layout costs one more gather/scatter pair
//! — doubling the communication of a multiply whose result feeds the next
//! one.
//!
//! Communication is *simulated*: the arithmetic runs in-process and is
//! exact, while a [`CommLedger`] records what the collectives would cost in
//! latency terms (alpha) and words moved (beta), plus a flop counter.
//! Ledger accounting follows the leading-order model: only terms that scale
//! with `N` or `nnz` are charged (the `k x k`-sized solve work and the
//! `k`-word momentum reduction are latency-only noise at that order), which
//! is exactly what the closed-form per-iteration predictions count.

use crate::dense::DenseMatrix;
use crate::driver::{choose_steps, momentum_betas};
use crate::error::{OfmError, Result};
use crate::kernels::{direction_from, Family, Method};
use crate::linesearch::StepSizes;
use crate::sparse::SparseSym;

/// `log2(p)`, exact for powers of two.
fn log2p(p: usize) -> f64 {
    debug_assert!(p >= 1);
    if p.is_power_of_two() {
        p.trailing_zeros() as f64
    } else {
        (p as f64).log2()
    }
}

/// Events and words attributed to one collective flavor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CollectiveTally {
    pub events: f64,
    pub words: f64,
}

/// Running account of simulated communication and arithmetic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLedger {
    /// Total latency terms (number of alpha-cost message rounds).
    pub latency_events: f64,
    /// Total words moved per process (beta cost).
    pub words_moved: f64,
    /// Leading-order floating-point operations per process.
    pub flops: f64,
    pub allgather: CollectiveTally,
    pub reduce_scatter: CollectiveTally,
    pub allreduce: CollectiveTally,
}

impl CommLedger {
    pub fn new() -> CommLedger {
        CommLedger::default()
    }

    fn record_allgather(&mut self, events: f64, words: f64) {
        self.allgather.events += events;
        self.allgather.words += words;
        self.latency_events += events;
        self.words_moved += words;
    }

    fn record_reduce_scatter(&mut self, events: f64, words: f64) {
        self.reduce_scatter.events += events;
        self.reduce_scatter.words += words;
        self.latency_events += events;
        self.words_moved += words;
    }

    /// Ring-style allreduce of `words_per_process` data on `p` processes:
    /// `2 log2 p` latency terms and `2 w log2 p` words.
    pub fn charge_allreduce(&mut self, p: usize, words_per_process: f64) {
        let (events, words) = allreduce_cost(words_per_process, p);
        self.allreduce.events += events;
        self.allreduce.words += words;
        self.latency_events += events;
        self.words_moved += words;
    }

    /// An allreduce whose payload is below the ledger's word resolution
    /// (order-`k` data): latency is charged, words are not.
    pub fn charge_allreduce_latency_only(&mut self, p: usize) {
        let events = 2.0 * log2p(p);
        self.allreduce.events += events;
        self.latency_events += events;
    }

    pub fn add_flops(&mut self, flops: f64) {
        self.flops += flops;
    }

    /// Fold another ledger into this one (tallies are additive).
    pub fn merge(&mut self, other: &CommLedger) {
        self.latency_events += other.latency_events;
        self.words_moved += other.words_moved;
        self.flops += other.flops;
        self.allgather.events += other.allgather.events;
        self.allgather.words += other.allgather.words;
        self.reduce_scatter.events += other.reduce_scatter.events;
        self.reduce_scatter.words += other.reduce_scatter.words;
        self.allreduce.events += other.allreduce.events;
        self.allreduce.words += other.allreduce.words;
    }
}

/// `(latency terms, words)` for one allreduce of `words` data per process.
pub fn allreduce_cost(words: f64, p: usize) -> (f64, f64) {
    let lg = log2p(p);
    (2.0 * lg, 2.0 * words * lg)
}

/// Whether a multiply restores the input layout for the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relayout {
    /// Leave the result in the transposed output layout (cheapest).
    Skip,
    /// Move the result back to the input layout (doubles communication).
    Restore,
}

/// Sparse CSR block with block-local row and column indices.
#[derive(Debug, Clone)]
struct CsrBlock {
    n_rows: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBlock {
    fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out += self * x_stripe` where `x_stripe` holds this block's column
    /// range and `out` its row range.
    fn multiply_add(&self, x_stripe: &DenseMatrix, out: &mut DenseMatrix) {
        for j in 0..x_stripe.n_cols() {
            let xc = x_stripe.col(j).to_vec();
            let oc = out.col_mut(j);
            for r in 0..self.n_rows {
                let lo = self.row_ptr[r];
                let hi = self.row_ptr[r + 1];
                let mut acc = 0.0;
                for t in lo..hi {
                    acc += self.values[t] * xc[self.col_idx[t]];
                }
                oc[r] += acc;
            }
        }
    }
}

/// Which pieces of the problem one process owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ownership {
    /// Sparse block coordinates on the grid.
    pub a_block: (usize, usize),
    /// Flat index of the owned input-panel block.
    pub x_block: usize,
    /// Flat index of the owned output-panel block.
    pub y_block: usize,
}

/// The partitioned operator plus the current dense panel.
#[derive(Debug, Clone)]
pub struct ProcessGrid {
    p: usize,
    side: usize,
    n: usize,
    nnz_total: usize,
    /// Coarse stripe boundaries (`side + 1` entries, ceil partition of rows).
    stripe_bounds: Vec<usize>,
    /// Fine block boundaries (`p + 1` entries): flat block
    /// `stripe * side + sub` covers `fine_bounds[m]..fine_bounds[m + 1]`.
    fine_bounds: Vec<usize>,
    /// Blocks in row-major grid order `(i, j) -> i * side + j`.
    blocks: Vec<CsrBlock>,
    panel: DenseMatrix,
}

/// Ceil-partition `[0, n)` into `parts` contiguous ranges (larger ranges
/// first when `n` is not divisible).
fn ceil_bounds(start: usize, n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let rem = n % parts;
    let mut bounds = Vec::with_capacity(parts + 1);
    let mut cursor = start;
    bounds.push(cursor);
    for s in 0..parts {
        cursor += base + usize::from(s < rem);
        bounds.push(cursor);
    }
    bounds
}

/// Lay the operator out on a `sqrt(p) x sqrt(p)` grid and attach the panel.
pub fn partition_1p5d(a: &SparseSym, x: &DenseMatrix, p: usize) -> Result<ProcessGrid> {
    let side = (p as f64).sqrt().round() as usize;
    if side == 0 || side * side != p {
        return Err(OfmError::InvalidArgument(format!(
            "process count must be a perfect square, got {p}"
        )));
    }
    let n = a.n();
    if side > n {
        return Err(OfmError::InvalidArgument(format!(
            "grid side {side} exceeds matrix order {n}"
        )));
    }
    if x.n_rows() != n {
        return Err(OfmError::DimensionMismatch(format!(
            "panel has {} rows but operator order is {n}",
            x.n_rows()
        )));
    }

    let stripe_bounds = ceil_bounds(0, n, side);
    let mut fine_bounds = Vec::with_capacity(p + 1);
    fine_bounds.push(0);
    for s in 0..side {
        let len = stripe_bounds[s + 1] - stripe_bounds[s];
        let sub = ceil_bounds(stripe_bounds[s], len, side);
        fine_bounds.extend_from_slice(&sub[1..]);
    }

    // Scatter entries into blocks. Scanning rows ascending with sorted
    // columns keeps every block's triplets already in CSR order.
    let stripe_of = |row: usize| -> usize {
        stripe_bounds.partition_point(|&b| b <= row) - 1
    };
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); p];
    for i in 0..n {
        let si = stripe_of(i);
        let li = i - stripe_bounds[si];
        let (cols, vals) = a.row(i);
        for (&jcol, &v) in cols.iter().zip(vals) {
            let sj = stripe_of(jcol);
            let lj = jcol - stripe_bounds[sj];
            triplets[si * side + sj].push((li, lj, v));
        }
    }
    let mut blocks = Vec::with_capacity(p);
    for (b, trips) in triplets.into_iter().enumerate() {
        let i = b / side;
        let rows = stripe_bounds[i + 1] - stripe_bounds[i];
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &trips {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        blocks.push(CsrBlock {
            n_rows: rows,
            row_ptr,
            col_idx: trips.iter().map(|&(_, c, _)| c).collect(),
            values: trips.iter().map(|&(_, _, v)| v).collect(),
        });
    }

    Ok(ProcessGrid {
        p,
        side,
        n,
        nnz_total: a.nnz(),
        stripe_bounds,
        fine_bounds,
        blocks,
        panel: x.clone(),
    })
}

impl ProcessGrid {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.nnz_total
    }

    pub fn stripe_bounds(&self) -> &[usize] {
        &self.stripe_bounds
    }

    pub fn fine_bounds(&self) -> &[usize] {
        &self.fine_bounds
    }

    pub fn panel(&self) -> &DenseMatrix {
        &self.panel
    }

    /// Swap in a new dense operand (same row count).
    pub fn load_panel(&mut self, x: &DenseMatrix) -> Result<()> {
        if x.n_rows() != self.n {
            return Err(OfmError::DimensionMismatch(format!(
                "panel has {} rows but operator order is {}",
                x.n_rows(),
                self.n
            )));
        }
        self.panel = x.clone();
        Ok(())
    }

    /// Stored entries in block `(i, j)`.
    pub fn block_nnz(&self, i: usize, j: usize) -> usize {
        self.blocks[i * self.side + j].nnz()
    }

    /// What process `(i, j)` owns: its sparse block, the input block
    /// `j * side + i`, and the output block `i * side + j`.
    pub fn ownership(&self, i: usize, j: usize) -> Ownership {
        Ownership {
            a_block: (i, j),
            x_block: j * self.side + i,
            y_block: i * self.side + j,
        }
    }

    /// Copy of the panel rows in stripe `s` (the allgathered operand).
    fn panel_stripe(&self, s: usize) -> DenseMatrix {
        let lo = self.stripe_bounds[s];
        let hi = self.stripe_bounds[s + 1];
        DenseMatrix::from_fn(hi - lo, self.panel.n_cols(), |r, c| self.panel.get(lo + r, c))
    }
}

/// One distributed multiply `Y = A * panel`.
///
/// Arithmetic is exact (the partial sums combine in ascending grid-column
/// order); the ledger receives one allgather and one reduce-scatter of
/// `N k / sqrt(p)` words each — doubled under [`Relayout::Restore`] — plus
/// `2 k nnz / p` flops.
pub fn spmm_1p5d(grid: &ProcessGrid, ledger: &mut CommLedger, relayout: Relayout) -> DenseMatrix {
    let k = grid.panel.n_cols();
    let nf = grid.n as f64;
    let kf = k as f64;
    let lg = log2p(grid.p);
    let stripe_words = nf * kf / grid.side as f64;

    // Phase 1: replicate input blocks up each grid column.
    ledger.record_allgather(lg, stripe_words);
    let stripes: Vec<DenseMatrix> = (0..grid.side).map(|s| grid.panel_stripe(s)).collect();

    // Phase 2: local block multiplies.
    ledger.add_flops(2.0 * kf * grid.nnz_total as f64 / grid.p as f64);
    let mut y = DenseMatrix::zeros(grid.n, k);
    for i in 0..grid.side {
        let lo = grid.stripe_bounds[i];
        let hi = grid.stripe_bounds[i + 1];
        let mut acc = DenseMatrix::zeros(hi - lo, k);
        // Phase 3 pairs with this loop: partials reduce in ascending j.
        for j in 0..grid.side {
            grid.blocks[i * grid.side + j].multiply_add(&stripes[j], &mut acc);
        }
        for c in 0..k {
            let src = acc.col(c);
            for r in 0..src.len() {
                y.set(lo + r, c, src[r]);
            }
        }
    }
    ledger.record_reduce_scatter(lg, stripe_words);

    // Phase 4 (optional): the result sits in the transposed layout; moving
    // it back is communication-wise another identity multiply. The values
    // themselves are already assembled globally, so this is pure cost.
    if relayout == Relayout::Restore {
        ledger.record_allgather(lg, stripe_words);
        ledger.record_reduce_scatter(lg, stripe_words);
    }
    y
}

/// Ratio of the heaviest block to the mean block load: `p * max_block_nnz /
/// total_nnz`. Equals 1 for perfectly even layouts and `p` when one block
/// holds everything.
pub fn load_imbalance(grid: &ProcessGrid) -> Result<f64> {
    if grid.nnz_total == 0 {
        return Err(OfmError::InvalidArgument(
            "load imbalance is undefined for an empty operator".into(),
        ));
    }
    let max_nnz = grid.blocks.iter().map(CsrBlock::nnz).max().unwrap_or(0);
    Ok(grid.p as f64 * max_nnz as f64 / grid.nnz_total as f64)
}

/// Closed-form per-iteration cost at leading order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPrediction {
    pub flops: f64,
    pub latency_terms: f64,
    pub bandwidth_words: f64,
}

/// Predicted cost of one full update (direction, momentum, exact line
/// search, axpy) for the given method family and machine shape.
pub fn predict_iteration_cost(
    method: Method,
    nnz: usize,
    n: usize,
    k: usize,
    p: usize,
) -> CostPrediction {
    let nf = n as f64;
    let kf = k as f64;
    let pf = p as f64;
    let nnzf = nnz as f64;
    let lg = log2p(p);
    let sqrt_p = if (pf.sqrt().round() as usize).pow(2) == p {
        pf.sqrt().round()
    } else {
        pf.sqrt()
    };
    match method.family() {
        Family::F1 => CostPrediction {
            flops: (nnzf * 4.0 * kf + 12.0 * nf * kf * kf + 12.0 * nf * kf) / pf,
            latency_terms: 20.0 * lg,
            bandwidth_words: 8.0 * nf * kf / sqrt_p + 10.0 * nf * kf * lg / pf,
        },
        Family::F2 => CostPrediction {
            flops: (nnzf * 4.0 * kf + 16.0 * nf * kf * kf + 14.0 * nf * kf) / pf,
            latency_terms: 22.0 * lg,
            bandwidth_words: 8.0 * nf * kf / sqrt_p + 12.0 * nf * kf * lg / pf,
        },
    }
}

/// Output of one simulated distributed update.
#[derive(Debug, Clone)]
pub struct DistributedStep {
    pub x: DenseMatrix,
    pub v: DenseMatrix,
    pub g: DenseMatrix,
    pub steps: StepSizes,
}

/// One full update through the simulated machine, numerically identical to
/// the serial driver's iteration up to the reassociated sparse products.
///
/// `prev` carries `(v, g)` from the preceding update; without it this is a
/// first (steepest-descent) update and the momentum reduction is neither
/// needed nor charged. Ledger charges per phase:
///
/// * direction: one multiply with relayout, one dot-product allreduce of
///   `N k / p` words for family one (two for family two), and the local
///   Gram/assembly flops;
/// * momentum: a latency-only allreduce plus `7 N k / p` flops;
/// * line search: one multiply with relayout, four dot-product allreduces,
///   `(8 N k^2 + 2 N k) / p` flops (the order-`k` cubic solve is not
///   charged);
/// * update: `2 N k / p` flops.
pub fn distributed_iteration(
    method: Method,
    grid: &mut ProcessGrid,
    x: &DenseMatrix,
    prev: Option<(&DenseMatrix, &DenseMatrix)>,
    ledger: &mut CommLedger,
) -> Result<DistributedStep> {
    let n = grid.n;
    let k = x.n_cols();
    let nf = n as f64;
    let kf = k as f64;
    let pf = grid.p as f64;

    // Direction at x.
    grid.load_panel(x)?;
    let w = spmm_1p5d(grid, ledger, Relayout::Restore);
    let g = direction_from(method, x, &w);
    match method.family() {
        Family::F1 => {
            ledger.charge_allreduce(grid.p, nf * kf / pf);
            ledger.add_flops((4.0 * nf * kf * kf + nf * kf) / pf);
        }
        Family::F2 => {
            ledger.charge_allreduce(grid.p, nf * kf / pf);
            ledger.charge_allreduce(grid.p, nf * kf / pf);
            ledger.add_flops((8.0 * nf * kf * kf + 3.0 * nf * kf) / pf);
        }
    }

    // Momentum mixing.
    let v = match prev {
        Some((v_prev, g_prev)) => {
            ledger.charge_allreduce_latency_only(grid.p);
            ledger.add_flops(7.0 * nf * kf / pf);
            let betas = momentum_betas(&g, g_prev, true);
            let mut d = DenseMatrix::zeros(n, k);
            for j in 0..k {
                d.add_scaled_col(j, betas[j], v_prev);
                d.add_scaled_col(j, -1.0, &g);
            }
            d
        }
        None => {
            ledger.add_flops(nf * kf / pf);
            let mut d = g.clone();
            d.scale(-1.0);
            d
        }
    };

    // Exact line search.
    grid.load_panel(&v)?;
    let av = spmm_1p5d(grid, ledger, Relayout::Restore);
    for _ in 0..4 {
        ledger.charge_allreduce(grid.p, nf * kf / pf);
    }
    ledger.add_flops((8.0 * nf * kf * kf + 2.0 * nf * kf) / pf);
    let steps = choose_steps(method, x, &v, &w, &av)?;

    // Update.
    let mut x_next = x.clone();
    for j in 0..k {
        x_next.add_scaled_col(j, steps.for_column(j), &v);
    }
    ledger.add_flops(2.0 * nf * kf / pf);
    grid.load_panel(&x_next)?;

    Ok(DistributedStep { x: x_next, v, g, steps })
}
