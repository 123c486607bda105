//! Experiment driver for representation generalization analysis: TOML
//! configs, built-in presets, CSV/JSON emission and run manifests.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod presets;

pub use cli::{execute, run_stages, Cli, Command};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use output::RunManifest;
pub use presets::{Preset, Stage};
