//! Scenario runner, metrics, comparisons, gain sweeps, configuration and CSV.

pub mod batch;
pub mod config;
pub mod csv;
pub mod metrics;
pub mod scenario;

pub use batch::{compare_controllers, gain_sweep, Comparison, GainGrid, Ratios, SweepRow};
pub use config::{parse_config, LoopMode, ScenarioConfig, Thresholds};
pub use csv::{emit_csv, log_to_csv, sweep_to_csv};
pub use metrics::{compute_metrics, Metrics};
pub use scenario::{run_scenario, run_scenario_full, RunOutput, SimLog, StepRecord};
