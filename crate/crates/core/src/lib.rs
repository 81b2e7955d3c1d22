//! Trace-driven workload characterization for near-memory computing.
//!
//! The crate reads SSA-form dynamic instruction traces and computes memory
//! entropy, multi-granularity reuse and spatial locality, and idealized
//! parallelism scores (ILP, DLP, BBLP, PBBLP), then reduces per-application
//! metric vectors with PCA.

pub mod analytics;
pub mod kernels;
pub mod memory;
pub mod parallelism;
pub mod report;
pub mod trace;
