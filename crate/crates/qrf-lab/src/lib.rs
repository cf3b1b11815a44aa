//! Scenario runner: configuration, scenario registry and report emission.

pub mod config;
pub mod error;
pub mod report;
pub mod scenarios;

pub use config::{validate_config, ScenarioConfig};
pub use error::{LabError, Result};
pub use report::{ScenarioReport, Sink};
pub use scenarios::{resolve, run_scenario, SCENARIOS};
