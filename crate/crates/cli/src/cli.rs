//! Argument parsing and command dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{unix_now, OutputSet, RunManifest};
use crate::pipeline;
use crate::presets::{Preset, Stage};

#[derive(Debug, Parser)]
#[command(name = "repgen", version, about = "Representation generalization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Overrides the config seed.
    #[arg(long, global = true, env = "REPGEN_SEED")]
    pub seed: Option<u64>,

    /// Worker threads for trial execution (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Overrides the config output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Singular values of the successor representation.
    Spectrum(ConfigArg),
    /// Effective dimension and coherence over the k grid.
    Effdim(ConfigArg),
    /// Approximation error of the value function over the k grid.
    ApproxError(ConfigArg),
    /// Empirical excess risk next to the heuristic and high-probability bounds.
    ExcessRisk(ConfigArg),
    /// Several representation families on one MDP.
    CompareReps(ConfigArg),
    /// Monte Carlo audits of the concentration lemmas.
    Audit(ConfigArg),
    /// A built-in experiment.
    Preset {
        name: Preset,
        /// Optional config replacing the preset's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Spectrum(_) => "spectrum".into(),
            Command::Effdim(_) => "effdim".into(),
            Command::ApproxError(_) => "approx-error".into(),
            Command::ExcessRisk(_) => "excess-risk".into(),
            Command::CompareReps(_) => "compare-reps".into(),
            Command::Audit(_) => "audit".into(),
            Command::Preset { name, .. } => format!("preset {}", name.name()),
        }
    }
}

/// Effective config after applying command-line overrides.
pub fn resolve_config(cli: &Cli) -> CliResult<(ExperimentConfig, &'static [Stage])> {
    let (mut config, stages) = match &cli.command {
        Command::Preset { name, config } => {
            let c = match config {
                Some(path) => ExperimentConfig::load(path)?,
                None => name.config(),
            };
            (c, name.stages())
        }
        Command::Spectrum(a) => (ExperimentConfig::load(&a.config)?, &[Stage::Spectrum][..]),
        Command::Effdim(a) => (ExperimentConfig::load(&a.config)?, &[Stage::Effdim][..]),
        Command::ApproxError(a) => (ExperimentConfig::load(&a.config)?, &[Stage::ApproxError][..]),
        Command::ExcessRisk(a) => (ExperimentConfig::load(&a.config)?, &[Stage::ExcessRisk][..]),
        Command::CompareReps(a) => (ExperimentConfig::load(&a.config)?, &[Stage::CompareReps][..]),
        Command::Audit(a) => (ExperimentConfig::load(&a.config)?, &[Stage::Audit][..]),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok((config, stages))
}

/// Runs the stages, writes their outputs and the manifest into
/// `config.output_dir`.
pub fn run_stages(command: &str, config: &ExperimentConfig, stages: &[Stage]) -> CliResult<RunManifest> {
    let started = unix_now();
    let mut out = OutputSet::create(&config.output_dir)?;
    for stage in stages {
        match stage {
            Stage::Spectrum => {
                out.write_csv("spectrum.csv", &pipeline::spectrum(config)?)?;
            }
            Stage::Effdim => {
                out.write_csv("effdim.csv", &pipeline::effdim(config)?)?;
            }
            Stage::ApproxError => {
                out.write_csv("approx_error.csv", &pipeline::approx_error(config)?)?;
            }
            Stage::ExcessRisk => {
                let result = pipeline::excess_risk(config)?;
                out.write_csv("excess_risk.csv", &result.rows)?;
                out.write_json("excess_risk_summary.json", &result.summary)?;
            }
            Stage::CompareReps => {
                let result = pipeline::compare_reps(config)?;
                out.write_csv("compare_reps.csv", &result.rows)?;
                out.write_json(
                    "compare_reps_summary.json",
                    &serde_json::json!({
                        "graph": result.graph,
                        "reward": result.reward,
                        "value_scale": result.value_scale,
                        "thresholds": result.thresholds,
                    }),
                )?;
            }
            Stage::Audit => {
                out.write_json("audit.json", &pipeline::audit(config)?)?;
            }
        }
    }
    let manifest = RunManifest::new(command, config, started, &out)?;
    manifest.write(&mut out)?;
    Ok(manifest)
}

pub fn execute(cli: &Cli) -> CliResult<RunManifest> {
    let (config, stages) = resolve_config(cli)?;
    let name = cli.command.name();
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| run_stages(&name, &config, stages))
        }
        None => run_stages(&name, &config, stages),
    }
}
