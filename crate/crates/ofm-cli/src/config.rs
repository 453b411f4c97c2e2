//! Experiment configuration: a JSON file plus command-line overrides, with
//! the overrides winning. Every run is identified by the FNV-1a hash of its
//! effective configuration, which namespaces the output directory so
//! concurrent invocations never collide.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ofm_core::error::OfmError;
use ofm_core::graph::StreamMode;
use ofm_core::kernels::Method;

/// Top-level CLI failure, mapped onto the process exit code: configuration
/// problems exit 2, numerical divergence 3, I/O 4.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] OfmError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(OfmError::Divergence { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Where the graph comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    /// Plain edge list or Matrix Market file on disk.
    File { path: PathBuf },
    /// Generated stochastic block model.
    Sbm {
        n: usize,
        blocks: usize,
        p_in: f64,
        p_out: f64,
        #[serde(default = "default_size_sigma")]
        size_sigma: f64,
        /// Generator seed; defaults to the experiment seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_size_sigma() -> f64 {
    1.0
}

/// Streaming-harness parameters (only meaningful for `ofm stream`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub parts: usize,
    #[serde(default = "default_stream_mode")]
    pub mode: String,
    /// Optimizer budget per stage after the first.
    #[serde(default = "default_iters_per_stage")]
    pub iters_per_stage: usize,
}

fn default_stream_mode() -> String {
    "edge-sampling".into()
}

fn default_iters_per_stage() -> usize {
    2
}

impl StreamConfig {
    pub fn mode(&self) -> Result<StreamMode> {
        StreamMode::parse(&self.mode).map_err(CliError::from)
    }
}

/// One experiment, fully specified. Serialized form is the config file; the
/// struct doubles as the record of what actually ran.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub linesearch: bool,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    /// k-means++ restarts inside one clustering call.
    #[serde(default = "default_kmeans_restarts")]
    pub kmeans_restarts: usize,
    /// Independent clustering repeats whose indices are averaged.
    #[serde(default = "default_kmeans_repeats")]
    pub kmeans_repeats: usize,
    /// Re-randomize the optimizer per repeat too, not just k-means.
    #[serde(default)]
    pub reseed_features: bool,
    /// Compute the relative Ritz residual when the order permits.
    #[serde(default = "default_true")]
    pub oracle: bool,
    #[serde(default)]
    pub stream: Option<StreamConfig>,
    /// Output directory; defaults to `runs/<config hash>`.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_method() -> String {
    "ofm-f1".into()
}

fn default_k() -> usize {
    2
}

fn default_max_iters() -> usize {
    100
}

fn default_grad_tol() -> f64 {
    1e-2
}

fn default_true() -> bool {
    true
}

fn default_initial_step() -> f64 {
    0.1
}

fn default_kmeans_restarts() -> usize {
    10
}

fn default_kmeans_repeats() -> usize {
    1
}

/// Command-line overrides applied on top of the file; set fields win.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<String>,
    pub k: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, over: &Overrides) {
        if let Some(m) = &over.method {
            self.method = m.clone();
        }
        if let Some(k) = over.k {
            self.k = k;
        }
        if let Some(t) = over.iters {
            self.max_iters = t;
        }
        if let Some(s) = over.seed {
            self.seed = s;
        }
        if let Some(o) = &over.out {
            self.out_dir = Some(o.clone());
        }
    }

    pub fn method(&self) -> Result<Method> {
        Method::parse(&self.method).map_err(CliError::from)
    }

    /// Check the fields that cannot wait until the run touches them.
    /// Clustering needs at least two groups; stream parameters belong to the
    /// stream subcommand alone.
    pub fn validate(&self, streaming: bool) -> Result<()> {
        self.method()?;
        if self.k < 2 {
            return Err(CliError::Config(format!(
                "clustering needs k >= 2, got k = {}",
                self.k
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(CliError::Config(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.kmeans_restarts == 0 || self.kmeans_repeats == 0 {
            return Err(CliError::Config(
                "kmeans_restarts and kmeans_repeats must be positive".into(),
            ));
        }
        match (&self.stream, streaming) {
            (Some(_), false) => Err(CliError::Config(
                "stream parameters are only valid with the stream subcommand".into(),
            )),
            (None, true) => Err(CliError::Config(
                "the stream subcommand needs a stream section in the config".into(),
            )),
            _ => {
                if let Some(s) = &self.stream {
                    if s.parts == 0 || s.iters_per_stage == 0 {
                        return Err(CliError::Config(
                            "stream parts and iters_per_stage must be positive".into(),
                        ));
                    }
                    s.mode()?;
                }
                Ok(())
            }
        }
    }

    /// FNV-1a over the canonical serialized form.
    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Where this experiment writes its artifacts.
    pub fn output_dir(&self) -> PathBuf {
        match &self.out_dir {
            Some(d) => d.clone(),
            None => PathBuf::from("runs").join(format!("{:016x}", self.hash())),
        }
    }
}
