//! Orthogonalization-free computation of spectral-clustering features.
//!
//! Given a graph, the pipeline builds the shifted normalized operator
//! `A = -I - D^{-1/2} S D^{-1/2}` (spectrum in `[-2, 0]`), drives one of four
//! first-order iterations toward the span of the bottom-`k` eigenvectors
//! without ever orthogonalizing an `N x k` block, and hands the rows to
//! k-means. The modules:
//!
//! * [`graph`] — edge-list / MatrixMarket loading, stochastic block model
//!   generation, streaming splits, and the shifted operator;
//! * [`kernels`] — the two objectives, their gradients, and the
//!   triangularized update directions;
//! * [`linesearch`] — exact step sizes from closed-form cubics;
//! * [`driver`] — the momentum-accelerated iteration loop;
//! * [`eig`] — a dense Jacobi eigensolver and Rayleigh-Ritz diagnostics,
//!   used as the trusted oracle at small scale;
//! * [`cluster`] — k-means and partition-agreement metrics;
//! * [`engine`] — a simulated 1.5D communication-avoiding distribution of
//!   the iteration with exact cost accounting.

pub mod cluster;
pub mod dense;
pub mod driver;
pub mod eig;
pub mod engine;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod linesearch;
pub mod sparse;

pub use dense::DenseMatrix;
pub use error::{OfmError, Result};
pub use graph::{Graph, GroundTruth, StreamMode, StreamPlan};
pub use kernels::Method;
pub use sparse::SparseSym;
