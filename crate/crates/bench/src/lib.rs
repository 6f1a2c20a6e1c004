//! Scenario sweeps over the cavity-QED models: configuration parsing, sweep
//! orchestration, model comparison, CSV output and gnuplot scripts.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{parse_config, ScenarioConfig};
pub use scenario::{run_scenario, ComparisonReport};
