//! Privacy-risk scoring toolkit for online social network data.
//!
//! The toolkit ingests share/hide flags, shared-byte counts, and a social
//! graph, and computes per-user privacy risk scores under several models:
//!
//! * `PSN` / `PSI` — policy-based scores (naive frequencies / two-parameter
//!   logistic item response fit),
//! * `PSGN` / `PSGI` — granularity-based scores over discrete byte-size
//!   levels (naive frequencies / graded response fit),
//! * `PSC` — centrality-as-score (PageRank, eigenvector, closeness,
//!   betweenness),
//! * `PSNA` — network-aware propagation of an intrinsic score.
//!
//! Model comparison utilities (attitude grouping, chi-square goodness of
//! fit, correlation matrices) live in [`eval`], and a deterministic
//! synthetic-dataset generator in [`synth`]. The `privscore` binary wires
//! everything into `generate` / `ingest` / `score` / `evaluate` commands.

// Most numeric kernels here walk several parallel arrays at once, where
// index loops read better than zip chains.
#![allow(clippy::needless_range_loop)]

pub mod bundle;
pub mod cli;
mod error;
pub mod eval;
pub mod granularity;
pub mod graph;
pub mod irt;
pub mod matrix;
pub mod naive;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{
    GranularityLevelMatrix, GranularityMatrix, ItemCatalog, ModelKind, ResponseMatrix,
    ScoreVector, UserRegistry,
};
