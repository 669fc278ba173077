//! Scenario-driven front end for `modbohm`: configuration, orchestration,
//! run bundles and reports.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;
pub mod identities;
pub mod report;
pub mod run;

pub use config::{Scenario, ScenarioConfig};
pub use error::CliError;
