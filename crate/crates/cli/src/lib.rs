//! Scenario files, experiment orchestration and report emission for the SHMPC workbench.

pub mod commands;
pub mod report;
pub mod scenario;

pub use commands::{check_report, cmd_run, simulate, Overrides, RunOutcome};
pub use scenario::{dump_scenario, load_scenario, parse_scenario, Scenario, ScenarioFile, SchemaError};
