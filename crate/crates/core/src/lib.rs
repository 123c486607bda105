//! Analysis toolkit for how state representations generalize in batch Monte
//! Carlo policy evaluation.
//!
//! The crate builds graph-structured MDPs, turns them into feature matrices
//! (successor-representation SVD truncations, Krylov bases, random features,
//! bisimulation features), evaluates effective dimension and the excess-risk
//! bounds that depend on it, and measures empirical excess risk by least
//! squares regression onto sampled returns.

pub mod audit;
pub mod bisimulation;
pub mod container;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod mdp;
pub mod monte_carlo;
pub mod representations;
pub mod risk;
pub mod rng;
pub mod spectra;
mod transport;

pub use error::{Error, Result};
pub use features::{Family, FeatureMatrix, Provenance};
pub use graph::{GraphKind, GraphSpec, RewardKind, RewardSpec};
pub use linalg::{Matrix, OrthonormalBasis, SpectralDecomposition, Vector};
pub use mdp::{ReturnStatistics, SuccessorMatrix, TabularMdp, ValueVector};
pub use monte_carlo::{ExcessRiskEstimate, RolloutDataset, TrialPlan};
pub use risk::{RiskBoundReport, SamplingDistribution};
