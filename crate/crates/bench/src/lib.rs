//! Shared fixtures for the benchmarks.

use repgen_core::graph::build_graph_mdp;
use repgen_core::{GraphKind, GraphSpec, RewardSpec, TabularMdp};

pub const FIXTURE_REWARD_SEED: u64 = 17;

/// Graph MDP with a normalized Gaussian reward.
pub fn graph_mdp(kind: GraphKind, num_states: usize, gamma: f64) -> TabularMdp {
    build_graph_mdp(
        &GraphSpec::new(kind, num_states, gamma),
        &RewardSpec::gaussian(FIXTURE_REWARD_SEED),
    )
    .expect("fixture graph is valid")
}
