//! Customer segmentation from raw card-transaction logs.
//!
//! The crate is organised as a pipeline of small, independently testable
//! stages:
//!
//! * [`ingest`] — CSV parsing, schema mapping, deduplication, imputation and
//!   a correlation-based column filter over a generic feature matrix.
//! * [`rfm`] — recency/frequency/monetary features per customer, z-score
//!   standardization and quantile scoring.
//! * [`clustering`] — from-scratch k-means (with elbow analysis), DBSCAN
//!   (kd-tree accelerated, with a parameter sweep) and agglomerative
//!   hierarchical clustering (four linkages, dendrogram export).
//! * [`pipelines`] — three end-to-end segmentation models built from the
//!   stages above, plus segment refinement and human-readable labeling.
//! * [`eval`] — partition agreement metrics (adjusted Rand index).
//! * [`synth`] — deterministic synthetic data generators used by tests,
//!   benchmarks and examples.
//!
//! All randomized stages take an explicit `u64` seed and are bit-for-bit
//! reproducible for a given seed on every platform.

pub mod clustering;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod money;
pub mod pipelines;
pub mod rfm;
pub mod synth;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
