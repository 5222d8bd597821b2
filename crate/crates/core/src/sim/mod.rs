//! Scenario configuration, the simulation loop, latency benchmarking and
//! plot-data output.

mod bench;
mod config;
mod plots;
mod records;
mod scenario;

pub use bench::{run_benchmark, run_benchmark_filters, BenchmarkEntry, BenchmarkReport, JITTER};
pub use config::{default_config, OutputPaths, ParameterReport, ScenarioConfig, Setup};
pub use plots::{emit_plot_data, PlotFiles};
pub use records::{read_csv, read_ndjson, read_records, write_csv, write_ndjson};
pub use scenario::{
    is_docked, run_scenario, run_with, MechanismCounts, ScenarioOutput, StepRecord, Summary, Termination, Violation,
    BLOWUP_LIMIT, DOCK_RADIUS, SWITCHING_TOLERANCE,
};
