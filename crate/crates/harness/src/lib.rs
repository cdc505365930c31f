//! Configuration, execution and artifacts for the `annihilate` CLI.

pub mod config;
pub mod error;
pub mod plan;
pub mod run;

pub use config::{parse_config, read_config, Settings};
pub use error::HarnessError;
pub use plan::{Command, ExperimentPlan, Format, Param};
pub use run::{run_plan, RunManifest};
