//! Scenario-driven simulation: TOML configs, the epoch engine and trace
//! output.

pub mod config;
pub mod engine;
pub mod trace;

pub use config::{
    BranchConfig, ConfigError, PartitionConfig, ProposalModel, ScenarioConfig, ValidatorConfig,
};
pub use engine::{run_scenario, SimError};
pub use trace::{Recovery, SimTrace, TraceMeta, TraceRow};
