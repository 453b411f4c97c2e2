//! Result emission: `results.csv`, `labels.txt`, and `history.csv`, plus
//! the parsers the round-trip guarantee is checked against.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! parsing an emitted file reproduces the in-memory values bit for bit.
//! Absent metrics (no ground truth, oracle off) are empty fields, never
//! zeros.

use std::fs;
use std::path::Path;

use ofm_core::graph::{Graph, GroundTruth};
use ofm_core::linesearch::StepSizes;

use crate::config::{CliError, Result};
use crate::pipeline::{ClusteringRun, RunHistory};

/// One `results.csv` row; identical for static runs and stream stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub n: usize,
    pub k: usize,
    pub iters: usize,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub relerr: Option<f64>,
    pub seconds: f64,
}

impl From<&ClusteringRun> for ResultRow {
    fn from(run: &ClusteringRun) -> ResultRow {
        ResultRow {
            method: run.method.as_str().to_string(),
            n: run.n,
            k: run.k,
            iters: run.iterations,
            ari: run.ari,
            nmi: run.nmi,
            relerr: run.relerr,
            seconds: run.wall_time,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_results(rows: &[ResultRow]) -> String {
    let mut out = String::from("method,n,k,iters,ari,nmi,relerr,seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.n,
            r.k,
            r.iters,
            opt(r.ari),
            opt(r.nmi),
            opt(r.relerr),
            r.seconds
        ));
    }
    out
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| CliError::Config(format!("results line {line}: {e}")))
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .parse::<T>()
        .map_err(|e| CliError::Config(format!("results line {line}: {e}")))
}

/// Inverse of [`render_results`]; used to check the round-trip invariant.
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == "method,n,k,iters,ari,nmi,relerr,seconds" => {}
        other => {
            return Err(CliError::Config(format!(
                "unexpected results header: {:?}",
                other.map(|(_, h)| h)
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(CliError::Config(format!(
                "results line {i}: expected 8 fields, got {}",
                f.len()
            )));
        }
        rows.push(ResultRow {
            method: f[0].to_string(),
            n: parse_field(f[1], i)?,
            k: parse_field(f[2], i)?,
            iters: parse_field(f[3], i)?,
            ari: parse_opt(f[4], i)?,
            nmi: parse_opt(f[5], i)?,
            relerr: parse_opt(f[6], i)?,
            seconds: parse_field(f[7], i)?,
        });
    }
    Ok(rows)
}

fn render_step(s: &StepSizes) -> String {
    match s {
        StepSizes::Global(a) => a.to_string(),
        StepSizes::PerColumn(v) => {
            v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
        }
    }
}

/// Histories concatenated across stages under a single running iteration
/// counter; per-column steps join with `;` inside the one step field.
pub fn render_history(histories: &[&RunHistory]) -> String {
    let mut out = String::from("iteration,objective,grad_norm,step\n");
    let mut t = 0usize;
    for h in histories {
        for i in 0..h.objective.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t,
                h.objective[i],
                h.grad_norm[i],
                render_step(&h.steps[i])
            ));
            t += 1;
        }
    }
    out
}

pub fn render_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out
}

/// Write the three run artifacts: one results row per run, the final run's
/// labels, and every run's history under a shared iteration counter.
pub fn write_run_artifacts(dir: &Path, runs: &[ClusteringRun]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows: Vec<ResultRow> = runs.iter().map(ResultRow::from).collect();
    fs::write(dir.join("results.csv"), render_results(&rows))?;
    if let Some(last) = runs.last() {
        fs::write(dir.join("labels.txt"), render_labels(&last.labels.labels))?;
    }
    let histories: Vec<&RunHistory> = runs.iter().map(|r| &r.history).collect();
    fs::write(dir.join("history.csv"), render_history(&histories))?;
    Ok(())
}

/// Write a generated graph as an edge list plus its planted labels.
pub fn write_graph(dir: &Path, graph: &Graph, truth: &GroundTruth) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut edges = String::with_capacity(graph.n_edges() * 8);
    edges.push_str(&format!("# nodes: {}\n", graph.n_nodes()));
    for &(u, v) in graph.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    fs::write(dir.join("edges.txt"), edges)?;
    fs::write(dir.join("truth.txt"), render_labels(truth.labels()))?;
    Ok(())
}
