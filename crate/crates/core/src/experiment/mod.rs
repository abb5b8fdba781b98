//! Scenario generation, strategy runs, error metrics and output files.

pub mod config;
pub mod metrics;
pub mod plots;
pub mod signals;
pub mod suite;

pub use config::{NoiseConfig, ScenarioConfig, Strategy};
pub use metrics::{compute_metrics, ErrorMetrics, MetricsError};
pub use suite::{default_plan, run_suite, Executor, SuiteError, SuiteReport};
