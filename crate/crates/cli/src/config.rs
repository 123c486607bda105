//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use repgen_core::audit::AuditCell;
use repgen_core::graph::FOUR_ROOM_CELLS;
use repgen_core::mdp::return_statistics_for;
use repgen_core::{Family, GraphKind, GraphSpec, RewardKind, RewardSpec, SamplingDistribution, Vector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub graphs: Vec<GraphEntry>,
    #[serde(default = "default_rewards")]
    pub rewards: Vec<RewardSpec>,
    #[serde(default)]
    pub representation: RepresentationConfig,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub sigma: Sigma,
    #[serde(default)]
    pub nu: Nu,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub bisimulation: BisimulationConfig,
    #[serde(default)]
    pub audit: AuditSettings,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_gamma() -> f64 {
    0.99
}

fn default_rewards() -> Vec<RewardSpec> {
    vec![RewardSpec::gaussian(0)]
}

fn default_n() -> usize {
    300
}

fn default_trials() -> usize {
    10
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEntry {
    pub kind: GraphKind,
    pub num_states: usize,
}

impl GraphEntry {
    pub fn new(kind: GraphKind, num_states: usize) -> Self {
        Self { kind, num_states }
    }

    pub fn four_room() -> Self {
        Self::new(GraphKind::FourRoom, FOUR_ROOM_CELLS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationConfig {
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default)]
    pub k: KGrid,
    /// Seed for random features; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,
    /// Externally produced features (binary container or CSV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_path: Option<PathBuf>,
}

fn default_families() -> Vec<Family> {
    vec![Family::SrSvd]
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        Self {
            families: default_families(),
            k: KGrid::default(),
            random_seed: None,
            features_path: None,
        }
    }
}

/// Either an explicit list or an inclusive range of truncation levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KGrid {
    List(Vec<usize>),
    Range {
        start: usize,
        end: usize,
        #[serde(default = "one")]
        step: usize,
    },
}

fn one() -> usize {
    1
}

impl Default for KGrid {
    fn default() -> Self {
        KGrid::Range {
            start: 1,
            end: 150,
            step: 1,
        }
    }
}

impl KGrid {
    pub fn values(&self) -> Vec<usize> {
        match self {
            KGrid::List(v) => v.clone(),
            KGrid::Range { start, end, step } => (*start..=*end).step_by((*step).max(1)).collect(),
        }
    }
}

/// Noise scale: a number, or `"auto"` for `V_max / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sigma {
    #[default]
    Auto,
    Value(f64),
}

impl Sigma {
    pub fn resolve(self, r_max: f64, gamma: f64) -> f64 {
        match self {
            Sigma::Auto => return_statistics_for(r_max, gamma).sigma_bound,
            Sigma::Value(v) => v,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Name(String),
    Value(f64),
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => SigmaRepr::Name("auto".into()),
            Sigma::Value(v) => SigmaRepr::Value(*v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match SigmaRepr::deserialize(d)? {
            SigmaRepr::Name(s) if s == "auto" => Ok(Sigma::Auto),
            SigmaRepr::Name(s) => Err(serde::de::Error::custom(format!(
                "sigma must be a number or \"auto\", got \"{s}\""
            ))),
            SigmaRepr::Value(v) => Ok(Sigma::Value(v)),
        }
    }
}

/// Sampling distribution: `"uniform"` or an explicit probability vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Nu {
    #[default]
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NuRepr {
    Name(String),
    Values(Vec<f64>),
}

impl Serialize for Nu {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Nu::Uniform => NuRepr::Name("uniform".into()),
            Nu::Explicit(v) => NuRepr::Values(v.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Nu {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match NuRepr::deserialize(d)? {
            NuRepr::Name(s) if s == "uniform" => Ok(Nu::Uniform),
            NuRepr::Name(s) => Err(serde::de::Error::custom(format!(
                "nu must be \"uniform\" or a list of probabilities, got \"{s}\""
            ))),
            NuRepr::Values(v) => Ok(Nu::Explicit(v)),
        }
    }
}

impl Nu {
    pub fn distribution(&self, num_states: usize) -> repgen_core::Result<SamplingDistribution> {
        match self {
            Nu::Uniform => Ok(SamplingDistribution::uniform(num_states)),
            Nu::Explicit(v) => {
                if v.len() != num_states {
                    return Err(repgen_core::Error::Config(format!(
                        "nu has {} entries for {num_states} states",
                        v.len()
                    )));
                }
                SamplingDistribution::new(Vector::from_row_slice(v))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    /// Truncation tolerance as a fraction of `V_max`.
    #[serde(default = "default_truncation")]
    pub truncation_fraction: f64,
    /// Fixed horizon; overrides `truncation_fraction` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

fn default_truncation() -> f64 {
    repgen_core::monte_carlo::DEFAULT_TRUNCATION_FRACTION
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            truncation_fraction: default_truncation(),
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisimulationConfig {
    #[serde(default = "default_c_r")]
    pub c_r: f64,
    /// Defaults to the discount.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_t: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_c_r() -> f64 {
    1.0
}

fn default_max_iter() -> usize {
    20_000
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for BisimulationConfig {
    fn default() -> Self {
        Self {
            c_r: default_c_r(),
            c_t: None,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSettings {
    #[serde(default = "default_audit_trials")]
    pub trials: usize,
    /// Explicit cells; the standard matrix is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<AuditCell>>,
}

fn default_audit_trials() -> usize {
    2000
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            trials: default_audit_trials(),
            cells: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("config encoding: {e}")))
    }

    pub fn graph_spec(&self, entry: &GraphEntry) -> GraphSpec {
        GraphSpec::new(entry.kind, entry.num_states, self.gamma)
    }

    pub fn random_seed(&self) -> u64 {
        self.representation.random_seed.unwrap_or(self.seed)
    }

    /// Checks every precondition the pipelines rely on.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.graphs.is_empty() {
            return bad("at least one entry in `graphs` is required".into());
        }
        if self.rewards.is_empty() {
            return bad("at least one entry in `rewards` is required".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if let Sigma::Value(v) = self.sigma {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("sigma must be nonnegative, got {v}"));
            }
        }
        if self.representation.families.is_empty() {
            return bad("representation.families must not be empty".into());
        }
        let ks = self.representation.k.values();
        if ks.is_empty() || ks.contains(&0) {
            return bad("representation.k must list positive truncation levels".into());
        }
        if self.representation.families.contains(&Family::Custom) && self.representation.features_path.is_none() {
            return bad("family `custom` needs representation.features_path".into());
        }
        let rollout = &self.rollout;
        if !(rollout.truncation_fraction > 0.0 && rollout.truncation_fraction.is_finite()) {
            return bad("rollout.truncation_fraction must be positive".into());
        }
        if rollout.horizon == Some(0) {
            return bad("rollout.horizon must be at least 1".into());
        }
        let b = &self.bisimulation;
        if !(b.c_r > 0.0 && b.c_r.is_finite()) {
            return bad(format!("bisimulation.c_r must be positive, got {}", b.c_r));
        }
        if let Some(c_t) = b.c_t {
            if !(c_t > 0.0 && c_t < 1.0) {
                return bad(format!("bisimulation.c_t must lie in (0, 1), got {c_t}"));
            }
        } else if self.representation.families.contains(&Family::Bisimulation) && self.gamma == 0.0 {
            return bad("bisimulation.c_t defaults to gamma and must be positive".into());
        }
        if self.audit.trials == 0 {
            return bad("audit.trials must be at least 1".into());
        }
        for entry in &self.graphs {
            let spec = self.graph_spec(entry);
            spec.validate().map_err(CliError::from)?;
            let s = entry.num_states;
            if let Some(&k) = ks.iter().find(|&&k| k > s) {
                return bad(format!("representation.k = {k} exceeds S = {s} for {}", entry.kind));
            }
            for reward in &self.rewards {
                if !(reward.r_max > 0.0 && reward.r_max.is_finite()) {
                    return bad(format!("reward r_max must be positive, got {}", reward.r_max));
                }
                if let RewardKind::OneHot { index } = reward.kind {
                    if index >= s {
                        return bad(format!("one-hot index {index} out of range for {} with S = {s}", entry.kind));
                    }
                }
            }
            if let Nu::Explicit(_) = self.nu {
                self.nu.distribution(s).map_err(CliError::from)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = r#"
seed = 7
gamma = 0.9
n = 120
sigma = "auto"
nu = "uniform"
graphs = [{ kind = "torus1d", num_states = 20 }, { kind = "star", num_states = 20 }]
rewards = [{ kind = { kind = "one-hot", index = 3 }, r_max = 1.0 }, { kind = { kind = "all-ones" }, r_max = 2.0 }]

[representation]
families = ["sr-svd"]
k = { start = 1, end = 10, step = 3 }
"#;

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.representation.k.values(), vec![1, 4, 7, 10]);
        assert_eq!(c.sigma, Sigma::Auto);
        assert_eq!(c.trials, 10);
        assert_eq!(c.rewards[0], RewardSpec::one_hot(3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{SAMPLE}\nbogus = 1\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let text = SAMPLE.replace("families", "famlies");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [
            ("gamma = 0.9", "gamma = 1.0"),
            ("n = 120", "n = 0"),
            ("index = 3", "index = 20"),
            ("end = 10", "end = 22"),
            ("sigma = \"auto\"", "sigma = \"big\""),
            ("nu = \"uniform\"", "nu = [0.5, 0.5]"),
            ("num_states = 20 }, { kind = \"star\"", "num_states = 1 }, { kind = \"star\""),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{to}");
        }
    }

    #[test]
    fn sigma_resolution() {
        assert!((Sigma::Auto.resolve(1.0, 0.99) - 50.0).abs() < 1e-12);
        assert_eq!(Sigma::Value(3.0).resolve(1.0, 0.99), 3.0);
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            any::<u64>(),
            0.0f64..0.999,
            1usize..1000,
            prop_oneof![Just(Sigma::Auto), (0.0f64..100.0).prop_map(Sigma::Value)],
            proptest::collection::vec(1usize..20, 1..5),
            any::<bool>(),
            proptest::option::of(1usize..5000),
            1e-6f64..0.9,
        )
            .prop_map(|(seed, gamma, n, sigma, ks, explicit_nu, horizon, delta)| ExperimentConfig {
                seed: seed >> 1,
                output_dir: PathBuf::from("results/run"),
                gamma,
                graphs: vec![GraphEntry::new(GraphKind::Chain, 20), GraphEntry::new(GraphKind::OpenRoom, 25)],
                rewards: vec![RewardSpec::gaussian(seed >> 3), RewardSpec::one_hot(2)],
                representation: RepresentationConfig {
                    families: vec![Family::SrSvd, Family::Krylov],
                    k: KGrid::List(ks),
                    random_seed: Some(seed >> 2),
                    features_path: None,
                },
                n,
                trials: 3,
                delta,
                sigma,
                nu: if explicit_nu { Nu::Explicit(vec![0.05; 20]) } else { Nu::Uniform },
                rollout: RolloutConfig {
                    truncation_fraction: 1e-4,
                    horizon,
                },
                bisimulation: BisimulationConfig::default(),
                audit: AuditSettings::default(),
            })
    }

    proptest! {
        #[test]
        fn toml_round_trip(config in arb_config()) {
            let text = config.to_toml_string().unwrap();
            let back: ExperimentConfig = toml::from_str(&text).unwrap();
            prop_assert_eq!(&back, &config);
            let again = back.to_toml_string().unwrap();
            prop_assert_eq!(again, text);
        }
    }
}
