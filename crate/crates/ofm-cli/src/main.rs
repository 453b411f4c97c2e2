use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ofm_cli::config::{CliError, ExperimentConfig, Overrides};
use ofm_cli::output::{self, ResultRow};
use ofm_cli::pipeline::{build_problem, run_pipeline, run_streaming, ClusteringRun};
use ofm_cli::suite;
use ofm_core::dense::DenseMatrix;
use ofm_core::engine::{
    distributed_iteration, load_imbalance, partition_1p5d, predict_iteration_cost, CommLedger,
};
use ofm_core::graph::mix_seed;
use ofm_core::kernels::Method;

/// Orthogonalization-free spectral embedding and clustering experiments.
#[derive(Parser)]
#[command(name = "ofm", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured SBM graph and write its edge list and
    /// planted labels.
    Gen(RunArgs),
    /// One static pipeline run: optimize, cluster, score, emit CSVs.
    Cluster(RunArgs),
    /// Streaming run: stage-by-stage growth with warm starts.
    Stream(RunArgs),
    /// Simulated-machine cost accounting for all four methods.
    Bench(BenchArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override: ofm-f1 | triofm-f1 | ofm-f2 | triofm-f2.
    #[arg(long)]
    method: Option<String>,
    /// Override: number of feature columns / clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Override: iteration budget.
    #[arg(long)]
    iters: Option<usize>,
    /// Override: experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override: output directory (default runs/<config hash>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Simulated process count (perfect square).
    #[arg(long, default_value_t = 4)]
    procs: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only the fast criteria (skips the n = 500 fixture).
    #[arg(long)]
    quick: bool,
    /// Run a single criterion by number (1-11).
    #[arg(long)]
    criterion: Option<usize>,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply(&Overrides {
        method: args.method.clone(),
        k: args.k,
        iters: args.iters,
        seed: args.seed,
        out: args.out.clone(),
    });
    Ok(cfg)
}

fn print_run(run: &ClusteringRun) {
    let row = ResultRow::from(run);
    let stage = run.stage.map(|s| format!("stage {s}: ")).unwrap_or_default();
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "{stage}{} n={} k={} iters={} ari={} nmi={} relerr={} ({:.3}s)",
        row.method,
        row.n,
        row.k,
        row.iters,
        fmt(row.ari),
        fmt(row.nmi),
        fmt(run.relerr),
        row.seconds
    );
}

fn cmd_gen(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let problem = build_problem(&cfg)?;
    let truth = problem.truth.as_ref().ok_or_else(|| {
        CliError::Config("gen needs an sbm graph source (files are already on disk)".into())
    })?;
    let dir = cfg.output_dir();
    output::write_graph(&dir, &problem.graph, truth)?;
    println!(
        "wrote {} nodes / {} edges to {}",
        problem.graph.n_nodes(),
        problem.graph.n_edges(),
        dir.display()
    );
    Ok(())
}

fn cmd_cluster(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let run = run_pipeline(&cfg)?;
    let dir = cfg.output_dir();
    output::write_run_artifacts(&dir, std::slice::from_ref(&run))?;
    print_run(&run);
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_stream(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let runs = run_streaming(&cfg)?;
    let dir = cfg.output_dir();
    output::write_run_artifacts(&dir, &runs)?;
    for run in &runs {
        print_run(run);
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.run)?;
    cfg.validate(false)?;
    let problem = build_problem(&cfg)?;
    let a = &problem.operator;
    let (n, k, p) = (a.n(), cfg.k, args.procs);

    let x0 = DenseMatrix::gaussian(n, k, 1.0 / (n as f64).sqrt(), mix_seed(cfg.seed, 0x0f_0e));
    let imbalance = load_imbalance(&partition_1p5d(a, &x0, p)?)?;
    println!(
        "n={n} k={k} p={p} nnz={} load imbalance {imbalance:.3}",
        a.nnz()
    );
    println!("method,flops,latency,words,pred_flops,pred_latency,pred_words,exact");

    let mut csv = String::from("method,flops,latency,words,pred_flops,pred_latency,pred_words,exact\n");
    for method in Method::ALL {
        let mut grid = partition_1p5d(a, &x0, p)?;
        let mut warmup = CommLedger::new();
        let first = distributed_iteration(method, &mut grid, &x0, None, &mut warmup)?;
        let mut ledger = CommLedger::new();
        distributed_iteration(method, &mut grid, &first.x, Some((&first.v, &first.g)), &mut ledger)?;
        let pred = predict_iteration_cost(method, a.nnz(), n, k, p);
        let exact = ledger.flops == pred.flops
            && ledger.latency_events == pred.latency_terms
            && ledger.words_moved == pred.bandwidth_words;
        let line = format!(
            "{},{},{},{},{},{},{},{}",
            method,
            ledger.flops,
            ledger.latency_events,
            ledger.words_moved,
            pred.flops,
            pred.latency_terms,
            pred.bandwidth_words,
            exact
        );
        println!("{line}");
        csv.push_str(&line);
        csv.push('\n');
    }
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("bench.csv"), csv)?;
    println!("ledger written to {}", dir.join("bench.csv").display());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let ids: Vec<usize> = match (args.criterion, args.quick) {
        (Some(id), _) => vec![id],
        (None, true) => suite::QUICK_IDS.to_vec(),
        (None, false) => suite::all_ids(),
    };
    let reports = suite::run_many(&ids);
    let mut all_passed = true;
    for r in &reports {
        println!("{}", r.line());
        all_passed &= r.passed;
    }
    println!(
        "{}/{} criteria passed",
        reports.iter().filter(|r| r.passed).count(),
        reports.len()
    );
    Ok(all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Command::Gen(args) => cmd_gen(args).map(|()| true),
        Command::Cluster(args) => cmd_cluster(args).map(|()| true),
        Command::Stream(args) => cmd_stream(args).map(|()| true),
        Command::Bench(args) => cmd_bench(args).map(|()| true),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
