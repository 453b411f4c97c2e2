//! The end-to-end clustering pipeline and its streaming variant.
//!
//! A static run builds the shifted operator, optimizes the chosen loss,
//! row-normalizes the features, clusters them, and scores the partition
//! against planted labels when those exist. A streaming run replays the
//! edge stream stage by stage, warm-starting each stage's optimizer from
//! the previous stage's features.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use ofm_core::cluster::{ari, kmeans, nmi, normalize_rows, Labeling};
use ofm_core::dense::DenseMatrix;
use ofm_core::driver::{run_ofm, run_ofm_from, OfmOptions, OfmResult};
use ofm_core::eig::{relative_residual, ORACLE_GUARD};
use ofm_core::graph::{
    build_shifted_operator, load_edge_list, load_matrix_market, mix_seed, split_stream, Graph,
    GroundTruth,
};
use ofm_core::kernels::Method;
use ofm_core::linesearch::StepSizes;
use ofm_core::sparse::SparseSym;

use crate::config::{CliError, ExperimentConfig, GraphSource, Result};

/// Seed salt for clustering repeat `r` (one salt per repeat, all distinct
/// from the optimizer's and generator's salts).
fn repeat_salt(rep: usize) -> u64 {
    0x9d2c_5681 ^ ((rep as u64) << 8)
}

/// A graph ready to optimize: topology, optional planted labels, operator.
pub struct Problem {
    pub graph: Graph,
    pub truth: Option<GroundTruth>,
    pub operator: SparseSym,
}

/// Load or generate the graph named by the config and build its operator.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let (graph, truth) = match &cfg.graph {
        GraphSource::File { path } => (load_graph_file(path)?, None),
        GraphSource::Sbm { n, blocks, p_in, p_out, size_sigma, seed } => {
            let (g, t) = ofm_core::graph::generate_sbm(
                *n,
                *blocks,
                *p_in,
                *p_out,
                *size_sigma,
                seed.unwrap_or(cfg.seed),
            )?;
            (g, Some(t))
        }
    };
    let operator = build_shifted_operator(&graph);
    Ok(Problem { graph, truth, operator })
}

/// Edge-list by default; Matrix Market when the extension says so.
pub fn load_graph_file(path: &Path) -> Result<Graph> {
    let reader = BufReader::new(File::open(path)?);
    let is_mm = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("mtx"))
        .unwrap_or(false);
    let graph = if is_mm {
        load_matrix_market(reader)?
    } else {
        load_edge_list(reader, None)?
    };
    Ok(graph)
}

/// Per-iteration trail of one optimizer run, kept for emission.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub objective: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub steps: Vec<StepSizes>,
}

impl RunHistory {
    fn from_result(r: &OfmResult) -> RunHistory {
        RunHistory {
            objective: r.objective_history.clone(),
            grad_norm: r.grad_norm_history.clone(),
            steps: r.step_history.clone(),
        }
    }
}

/// Everything one pipeline run (or one streaming stage) produced.
#[derive(Debug, Clone)]
pub struct ClusteringRun {
    pub method: Method,
    pub n: usize,
    pub k: usize,
    pub labels: Labeling,
    /// Agreement with planted labels; absent when no ground truth exists.
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    /// Relative Ritz residual; absent above the oracle guard or when the
    /// oracle is switched off.
    pub relerr: Option<f64>,
    pub iterations: usize,
    pub wall_time: f64,
    pub stage: Option<usize>,
    pub history: RunHistory,
}

fn options_from(cfg: &ExperimentConfig, seed: u64, max_iters: usize) -> OfmOptions {
    let mut opts = OfmOptions::new(cfg.k);
    opts.max_iters = max_iters;
    opts.grad_tol = cfg.grad_tol;
    opts.seed = seed;
    opts.use_linesearch = cfg.linesearch;
    opts.initial_step = cfg.initial_step;
    opts
}

/// Cluster the features `kmeans_repeats` times, average the indices, and
/// keep the lowest-inertia labeling. With `reseed_features` the optimizer
/// itself reruns per repeat; otherwise only k-means is re-randomized, which
/// is the default repeat semantics.
fn cluster_and_score(
    cfg: &ExperimentConfig,
    method: Method,
    a: &SparseSym,
    base_features: &DenseMatrix,
    truth: Option<&GroundTruth>,
) -> Result<(Labeling, Option<f64>, Option<f64>)> {
    let mut best: Option<Labeling> = None;
    let mut ari_sum = 0.0;
    let mut nmi_sum = 0.0;

    for rep in 0..cfg.kmeans_repeats {
        let rerun;
        let features: &DenseMatrix = if cfg.reseed_features && rep > 0 {
            let opts = options_from(cfg, mix_seed(cfg.seed, repeat_salt(rep) | 1), cfg.max_iters);
            let r = run_ofm(method, a, &opts)?;
            rerun = normalize_rows(&r.x);
            &rerun
        } else {
            base_features
        };
        let labeling = kmeans(
            features,
            cfg.k,
            mix_seed(cfg.seed, repeat_salt(rep)),
            cfg.kmeans_restarts,
            100,
        )?;
        if let Some(t) = truth {
            ari_sum += ari(t.labels(), &labeling.labels)?;
            nmi_sum += nmi(t.labels(), &labeling.labels)?;
        }
        let better = match &best {
            Some(b) => labeling.inertia < b.inertia,
            None => true,
        };
        if better {
            best = Some(labeling);
        }
    }

    let reps = cfg.kmeans_repeats as f64;
    let (ari_avg, nmi_avg) = match truth {
        Some(_) => (Some(ari_sum / reps), Some(nmi_sum / reps)),
        None => (None, None),
    };
    Ok((best.expect("at least one repeat"), ari_avg, nmi_avg))
}

fn residual_if_oracle(
    cfg: &ExperimentConfig,
    a: &SparseSym,
    x: &DenseMatrix,
) -> Result<Option<f64>> {
    if cfg.oracle && a.n() <= ORACLE_GUARD {
        Ok(Some(relative_residual(a, x)?))
    } else {
        Ok(None)
    }
}

/// One static run: operator, optimizer, row normalization, k-means, scores.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ClusteringRun> {
    cfg.validate(false)?;
    let method = cfg.method()?;
    let problem = build_problem(cfg)?;
    let (run, _) = finish_run(cfg, method, &problem, None, None, cfg.max_iters)?;
    Ok(run)
}

/// Stage-by-stage streaming run. Stage `s` (1-based) sees the union of the
/// first `s` edge chunks; its optimizer starts from the previous stage's
/// features, except stage 1 which cold-starts under the full iteration
/// budget. Every stage is clustered and scored against the full-graph
/// ground truth.
pub fn run_streaming(cfg: &ExperimentConfig) -> Result<Vec<ClusteringRun>> {
    cfg.validate(true)?;
    let method = cfg.method()?;
    let stream = cfg.stream.as_ref().expect("validated");
    let problem = build_problem(cfg)?;
    let plan = split_stream(&problem.graph, stream.parts, stream.mode()?, cfg.seed)?;

    let mut runs = Vec::with_capacity(stream.parts);
    let mut carried: Option<DenseMatrix> = None;
    for s in 1..=stream.parts {
        let graph = plan.cumulative_graph(s - 1, problem.graph.n_nodes())?;
        let stage_problem = Problem {
            operator: build_shifted_operator(&graph),
            graph,
            truth: problem.truth.clone(),
        };
        let budget = if s == 1 { cfg.max_iters } else { stream.iters_per_stage };
        let (run, x) =
            finish_run(cfg, method, &stage_problem, carried.take(), Some(s), budget)?;
        carried = Some(x);
        runs.push(run);
    }
    Ok(runs)
}

/// Shared tail of the static and streaming paths: optimize (warm or cold),
/// normalize, cluster, score. Returns the run plus the raw feature block
/// for the next streaming stage.
fn finish_run(
    cfg: &ExperimentConfig,
    method: Method,
    problem: &Problem,
    warm_start: Option<DenseMatrix>,
    stage: Option<usize>,
    max_iters: usize,
) -> Result<(ClusteringRun, DenseMatrix)> {
    let a = &problem.operator;
    if cfg.k > a.n() {
        return Err(CliError::Config(format!(
            "k = {} exceeds the graph order {}",
            cfg.k,
            a.n()
        )));
    }
    let opts = options_from(cfg, cfg.seed, max_iters);
    let clock = Instant::now();
    let result = match &warm_start {
        Some(x0) => run_ofm_from(method, a, &opts, x0)?,
        None => run_ofm(method, a, &opts)?,
    };
    let features = normalize_rows(&result.x);
    let (labels, ari, nmi) =
        cluster_and_score(cfg, method, a, &features, problem.truth.as_ref())?;
    let relerr = residual_if_oracle(cfg, a, &result.x)?;
    let wall_time = clock.elapsed().as_secs_f64();
    let run = ClusteringRun {
        method,
        n: a.n(),
        k: cfg.k,
        labels,
        ari,
        nmi,
        relerr,
        iterations: result.iterations,
        wall_time,
        stage,
        history: RunHistory::from_result(&result),
    };
    Ok((run, result.x))
}
