//! Phase-diagram sweeps and their metrics and records.

pub mod config;
pub mod metrics;
pub mod records;
pub mod sweep;

pub use config::{ExperimentSpec, SolverMode};
pub use sweep::{run_phase_sweep, SweepSummary};
