//! Built-in experiment configurations.

use std::path::PathBuf;

use clap::ValueEnum;
use repgen_core::{Family, GraphKind, RewardSpec};
use serde::Serialize;

use crate::config::{
    AuditSettings, BisimulationConfig, ExperimentConfig, GraphEntry, KGrid, Nu, RepresentationConfig,
    RolloutConfig, Sigma,
};

/// Seed of the normalized Gaussian reward used by every preset.
pub const PRESET_REWARD_SEED: u64 = 2024;
pub const PRESET_SEED: u64 = 0;
pub const PRESET_STATES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Spectrum, effective dimension and excess risk on five graphs.
    Fig2,
    /// Representation families compared on the four-room domain.
    Fig3,
    /// Seven graphs under one-hot, all-ones and Gaussian rewards.
    Fig7,
}

/// Subcommand pipelines a preset runs, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Spectrum,
    Effdim,
    ApproxError,
    ExcessRisk,
    CompareReps,
    Audit,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig7 => "fig7",
        }
    }

    pub fn stages(self) -> &'static [Stage] {
        match self {
            Preset::Fig2 => &[Stage::Spectrum, Stage::Effdim, Stage::ExcessRisk],
            Preset::Fig3 => &[Stage::CompareReps],
            Preset::Fig7 => &[Stage::ApproxError, Stage::ExcessRisk],
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let s = PRESET_STATES;
        let gaussian = RewardSpec::gaussian(PRESET_REWARD_SEED);
        let base = ExperimentConfig {
            seed: PRESET_SEED,
            output_dir: PathBuf::from("out").join(self.name()),
            gamma: 0.99,
            graphs: Vec::new(),
            rewards: vec![gaussian],
            representation: RepresentationConfig {
                families: vec![Family::SrSvd],
                k: KGrid::Range {
                    start: 1,
                    end: 150,
                    step: 1,
                },
                random_seed: None,
                features_path: None,
            },
            n: 300,
            trials: 10,
            delta: 0.05,
            sigma: Sigma::Auto,
            nu: Nu::Uniform,
            rollout: RolloutConfig::default(),
            bisimulation: BisimulationConfig::default(),
            audit: AuditSettings::default(),
        };
        match self {
            Preset::Fig2 => ExperimentConfig {
                graphs: [
                    GraphKind::FullyConnected,
                    GraphKind::Star,
                    GraphKind::Disconnected,
                    GraphKind::OpenRoom,
                    GraphKind::Torus2d,
                ]
                .into_iter()
                .map(|kind| GraphEntry::new(kind, s))
                .collect(),
                ..base
            },
            Preset::Fig3 => {
                let cells = GraphEntry::four_room().num_states;
                ExperimentConfig {
                    graphs: vec![GraphEntry::four_room()],
                    representation: RepresentationConfig {
                        families: vec![Family::SrSvd, Family::Random, Family::Krylov, Family::Bisimulation],
                        k: KGrid::Range {
                            start: 1,
                            end: cells,
                            step: 1,
                        },
                        ..base.representation.clone()
                    },
                    ..base
                }
            }
            Preset::Fig7 => ExperimentConfig {
                graphs: [
                    GraphKind::Star,
                    GraphKind::Chain,
                    GraphKind::OpenRoom,
                    GraphKind::Torus1d,
                    GraphKind::Torus2d,
                    GraphKind::Disconnected,
                    GraphKind::FullyConnected,
                ]
                .into_iter()
                .map(|kind| GraphEntry::new(kind, s))
                .collect(),
                rewards: vec![RewardSpec::one_hot(s - 1), RewardSpec::all_ones(), gaussian],
                trials: 5,
                ..base
            },
        }
    }
}
