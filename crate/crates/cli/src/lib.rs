//! Scenario runner around `hardy-flow`: parses TOML scenarios, runs the
//! requested analyses and renders JSON reports, CSV tables and a text
//! summary.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;

pub use config::{load_scenario, Analysis, LoadedScenario, Scenario};
pub use error::{CliError, CliResult};
pub use run::{expand_plan, run_plan, write_artifacts, RunArtifacts, RunOptions, RunReport};
