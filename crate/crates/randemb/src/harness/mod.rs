//! Experiment orchestration: configuration, parallel Monte Carlo replicate
//! execution, zero counting, statistics, and deterministic CSV/JSON/SVG
//! output.
//!
//! The contract throughout: every output artifact except wall-clock timing
//! is a pure function of the experiment configuration (root seed included)
//! and is independent of worker count and scheduling order.

pub mod config;
pub mod output;
pub mod runner;
pub mod stats;
pub mod svg;
pub mod zero_count;

pub use config::{ExperimentConfig, ExperimentKind, ManifoldSpec, PartialConfig};
pub use output::{emit_outputs, render_csv, summarize};
pub use runner::{
    run_converge, run_experiment, run_lkc_converge, run_unbiased, run_zero_count, Payload,
    ReplicateRow, RowStatus, RunResult,
};
pub use zero_count::{zero_count_prediction, zero_count_replicate, ZeroCountOutcome};
