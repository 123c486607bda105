//! Row computations behind each subcommand.

use std::path::Path;

use rayon::prelude::*;
use repgen_core::audit::{default_audit_matrix, run_audit_cell, AuditReport};
use repgen_core::bisimulation::{bisimulation_metric, bisimulation_representation, ActionMdp, BisimulationParams};
use repgen_core::container;
use repgen_core::graph::{build_graph, generate_reward, Graph};
use repgen_core::mdp::{return_statistics, value_function};
use repgen_core::monte_carlo::{horizon_for_tolerance, run_trials_sweep};
use repgen_core::representations::{krylov_basis, random_features, SrSpectrum};
use repgen_core::risk::{
    approximation_error, coherence, effective_dimension, heuristic_excess_risk, k_bar, theorem1_bound,
    theorem_a2_bound,
};
use repgen_core::spectra::{star_spectrum_closed_form, torus1d_spectrum_closed_form};
use repgen_core::{
    rng, Family, FeatureMatrix, GraphKind, GraphSpec, RewardSpec, RiskBoundReport, SamplingDistribution,
    TabularMdp, TrialPlan, Vector,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, GraphEntry};
use crate::error::{CliError, CliResult};
use crate::output::{num, opt_num, CsvRow};

/// A graph with its successor-representation spectrum, shared by all rewards.
pub struct GraphCase {
    pub entry: GraphEntry,
    pub spec: GraphSpec,
    pub graph: Graph,
    pub spectrum: SrSpectrum,
    base: TabularMdp,
}

impl GraphCase {
    pub fn new(config: &ExperimentConfig, entry: &GraphEntry) -> CliResult<Self> {
        let spec = config.graph_spec(entry);
        let graph = build_graph(&spec)?;
        let reward = generate_reward(&config.rewards[0], spec.num_states)?;
        let base = TabularMdp::new(graph.random_walk(), reward, spec.discount, config.rewards[0].r_max)?;
        let spectrum = SrSpectrum::new(&base)?;
        Ok(Self {
            entry: *entry,
            spec,
            graph,
            spectrum,
            base,
        })
    }

    pub fn name(&self) -> &'static str {
        self.entry.kind.name()
    }

    pub fn num_states(&self) -> usize {
        self.spec.num_states
    }

    pub fn mdp(&self, reward: &RewardSpec) -> CliResult<TabularMdp> {
        let r = generate_reward(reward, self.num_states())?;
        Ok(self.base.with_reward(r, reward.r_max)?)
    }
}

/// Features of one family at every requested `k`. Families whose space stops
/// growing (a saturated Krylov space, a degenerate metric) reuse their full
/// basis for larger `k`.
pub fn family_features(
    config: &ExperimentConfig,
    case: &GraphCase,
    mdp: &TabularMdp,
    family: Family,
    ks: &[usize],
) -> CliResult<Vec<FeatureMatrix>> {
    let s = case.num_states();
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let full = match family {
        Family::SrSvd => return ks.iter().map(|&k| Ok(case.spectrum.features(k)?)).collect(),
        Family::Tabular => FeatureMatrix::tabular(s)?,
        Family::Random => random_features(s, k_max, config.random_seed())?,
        Family::Krylov => krylov_basis(mdp, k_max)?,
        Family::Bisimulation => {
            let action_mdp = match case.graph.compass() {
                Some(_) => ActionMdp::from_compass(&case.graph, mdp.reward())?,
                None => ActionMdp::from_policy(mdp)?,
            };
            let b = &config.bisimulation;
            let params = BisimulationParams {
                c_r: b.c_r,
                c_t: b.c_t.unwrap_or(config.gamma),
                max_iter: b.max_iter,
                tol: b.tol,
            };
            let metric = bisimulation_metric(&action_mdp, &params)?;
            if !metric.converged {
                return Err(repgen_core::Error::Numerical(format!(
                    "bisimulation iteration stopped at residual {:e} after {} sweeps",
                    metric.residual, metric.iterations_run
                ))
                .into());
            }
            bisimulation_representation(&metric, k_max)?
        }
        Family::Custom => {
            let path = config
                .representation
                .features_path
                .as_deref()
                .ok_or_else(|| CliError::Config("family `custom` needs representation.features_path".into()))?;
            let features = load_features(path)?;
            if features.num_states() != s {
                return Err(CliError::Config(format!(
                    "{} has {} rows, graph {} has {s} states",
                    path.display(),
                    features.num_states(),
                    case.name()
                )));
            }
            if k_max > features.k() {
                return Err(CliError::Config(format!(
                    "representation.k = {k_max} exceeds the {} columns of {}",
                    features.k(),
                    path.display()
                )));
            }
            features
        }
    };
    ks.iter()
        .map(|&k| Ok(full.leading_columns(k.min(full.k()))?))
        .collect()
}

/// Reads the binary container, or CSV when the extension is `.csv`.
pub fn load_features(path: &Path) -> CliResult<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        container::read_csv(reader, Family::Custom)?
    } else {
        container::read_binary(reader)?
    })
}

fn single_family(config: &ExperimentConfig, command: &str) -> CliResult<Family> {
    match config.representation.families.as_slice() {
        [family] => Ok(*family),
        many => Err(CliError::Config(format!(
            "{command} takes exactly one representation family, got {}",
            many.len()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub graph: String,
    pub index: usize,
    pub sigma: f64,
    pub sigma_closed_form: Option<f64>,
}

impl CsvRow for SpectrumRow {
    const HEADER: &'static [&'static str] = &["graph", "index", "sigma", "sigma_closed_form"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.graph.clone(),
            self.index.to_string(),
            num(self.sigma),
            opt_num(self.sigma_closed_form),
        ]
    }
}

fn spectrum_rows(case: &GraphCase) -> CliResult<Vec<SpectrumRow>> {
    let s = case.num_states();
    let closed = match case.entry.kind {
        GraphKind::Torus1d if s >= 3 => Some(torus1d_spectrum_closed_form(s, case.spec.discount)?),
        GraphKind::Star if s >= 3 => Some(star_spectrum_closed_form(s, case.spec.discount)?),
        _ => None,
    };
    Ok(case
        .spectrum
        .decomposition
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &sigma)| SpectrumRow {
            graph: case.name().to_string(),
            index: i + 1,
            sigma,
            sigma_closed_form: closed.as_ref().map(|c| c[i]),
        })
        .collect())
}

pub fn spectrum(config: &ExperimentConfig) -> CliResult<Vec<SpectrumRow>> {
    let mut rows = Vec::new();
    for entry in &config.graphs {
        rows.extend(spectrum_rows(&GraphCase::new(config, entry)?)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffdimRow {
    pub graph: String,
    pub k: usize,
    pub d_eff: f64,
    pub coherence: f64,
}

impl CsvRow for EffdimRow {
    const HEADER: &'static [&'static str] = &["graph", "k", "d_eff", "coherence"];
    fn fields(&self) -> Vec<String> {
        vec![self.graph.clone(), self.k.to_string(), num(self.d_eff), num(self.coherence)]
    }
}

fn effdim_rows(config: &ExperimentConfig, case: &GraphCase, family: Family) -> CliResult<Vec<EffdimRow>> {
    let ks = config.representation.k.values();
    let mdp = case.mdp(&config.rewards[0])?;
    let features = family_features(config, case, &mdp, family, &ks)?;
    ks.iter()
        .zip(&features)
        .map(|(&k, phi)| {
            Ok(EffdimRow {
                graph: case.name().to_string(),
                k,
                d_eff: effective_dimension(phi)?,
                coherence: coherence(phi)?,
            })
        })
        .collect()
}

pub fn effdim(config: &ExperimentConfig) -> CliResult<Vec<EffdimRow>> {
    let family = single_family(config, "effdim")?;
    let mut rows = Vec::new();
    for entry in &config.graphs {
        rows.extend(effdim_rows(config, &GraphCase::new(config, entry)?, family)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRow {
    pub graph: String,
    pub reward: String,
    pub k: usize,
    pub approx_error: f64,
}

impl CsvRow for ApproxRow {
    const HEADER: &'static [&'static str] = &["graph", "reward", "k", "approx_error"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.graph.clone(),
            self.reward.clone(),
            self.k.to_string(),
            num(self.approx_error),
        ]
    }
}

pub fn approx_error(config: &ExperimentConfig) -> CliResult<Vec<ApproxRow>> {
    let family = single_family(config, "approx-error")?;
    let ks = config.representation.k.values();
    let mut rows = Vec::new();
    for entry in &config.graphs {
        let case = GraphCase::new(config, entry)?;
        for reward in &config.rewards {
            let mdp = case.mdp(reward)?;
            let v = value_function(&mdp)?.values;
            let features = family_features(config, &case, &mdp, family, &ks)?;
            for (&k, phi) in ks.iter().zip(&features) {
                rows.push(ApproxRow {
                    graph: case.name().to_string(),
                    reward: reward.kind.label(),
                    k,
                    approx_error: approximation_error(phi, &v)?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessRiskRow {
    pub graph: String,
    pub reward: String,
    pub k: usize,
    pub excess_risk_median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub heuristic: f64,
    pub bound: RiskBoundReport,
}

impl CsvRow for ExcessRiskRow {
    const HEADER: &'static [&'static str] = &[
        "graph",
        "reward",
        "k",
        "approx_error",
        "d_eff",
        "coherence",
        "excess_risk_median",
        "ci_low",
        "ci_high",
        "heuristic",
        "bound_total",
        "est_coupling",
        "est_variance",
        "est_high_order",
        "n_min",
        "bound_valid",
    ];
    fn fields(&self) -> Vec<String> {
        let b = &self.bound;
        vec![
            self.graph.clone(),
            self.reward.clone(),
            self.k.to_string(),
            num(b.approx_error),
            num(b.d_eff),
            num(b.coherence),
            num(self.excess_risk_median),
            num(self.ci_low),
            num(self.ci_high),
            num(self.heuristic),
            num(b.total),
            num(b.estimation_terms.coupling),
            num(b.estimation_terms.variance),
            num(b.estimation_terms.high_order),
            num(b.n_min),
            b.valid.to_string(),
        ]
    }
}

/// Per (graph, reward) minimizers of the three excess-risk curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgminSummary {
    pub graph: String,
    pub reward: String,
    pub argmin_k_empirical: usize,
    pub argmin_k_heuristic: usize,
    pub argmin_k_bound: usize,
    pub min_empirical: f64,
    pub min_heuristic: f64,
    pub min_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessRiskOutput {
    pub rows: Vec<ExcessRiskRow>,
    pub summary: Vec<ArgminSummary>,
}

fn argmin(values: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    values.fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best })
}

fn trial_plan(config: &ExperimentConfig, mdp: &TabularMdp) -> CliResult<TrialPlan> {
    let horizon = match config.rollout.horizon {
        Some(h) => h,
        None => {
            let v_max = return_statistics(mdp).v_max;
            horizon_for_tolerance(mdp.discount(), mdp.r_max(), config.rollout.truncation_fraction * v_max)?
        }
    };
    Ok(TrialPlan {
        n: config.n,
        trials: config.trials,
        base_seed: config.seed,
        horizon,
    })
}

fn bound_report(
    config: &ExperimentConfig,
    phi: &FeatureMatrix,
    v: &Vector,
    nu: &SamplingDistribution,
    sigma: f64,
) -> CliResult<RiskBoundReport> {
    Ok(if nu.is_uniform() {
        theorem1_bound(phi, v, config.n, config.delta, sigma)?
    } else {
        theorem_a2_bound(phi, v, config.n, config.delta, sigma, nu)?
    })
}

pub fn excess_risk(config: &ExperimentConfig) -> CliResult<ExcessRiskOutput> {
    let family = single_family(config, "excess-risk")?;
    let ks = config.representation.k.values();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for entry in &config.graphs {
        let case = GraphCase::new(config, entry)?;
        let nu = config.nu.distribution(case.num_states())?;
        for reward in &config.rewards {
            let mdp = case.mdp(reward)?;
            let v = value_function(&mdp)?.values;
            let sigma = config.sigma.resolve(reward.r_max, config.gamma);
            let features = family_features(config, &case, &mdp, family, &ks)?;
            let plan = trial_plan(config, &mdp)?;
            let estimates = run_trials_sweep(&mdp, &features, &nu, &plan)?;
            let start = rows.len();
            for ((&k, phi), est) in ks.iter().zip(&features).zip(estimates) {
                rows.push(ExcessRiskRow {
                    graph: case.name().to_string(),
                    reward: reward.kind.label(),
                    k,
                    excess_risk_median: est.median,
                    ci_low: est.ci_low,
                    ci_high: est.ci_high,
                    heuristic: heuristic_excess_risk(phi, &v, config.n)?,
                    bound: bound_report(config, phi, &v, &nu, sigma)?,
                });
            }
            let block = &rows[start..];
            let (ke, me) = argmin(block.iter().map(|r| (r.k, r.excess_risk_median)));
            let (kh, mh) = argmin(block.iter().map(|r| (r.k, r.heuristic)));
            let (kb, mb) = argmin(block.iter().map(|r| (r.k, r.bound.total)));
            summary.push(ArgminSummary {
                graph: case.name().to_string(),
                reward: reward.kind.label(),
                argmin_k_empirical: ke,
                argmin_k_heuristic: kh,
                argmin_k_bound: kb,
                min_empirical: me,
                min_heuristic: mh,
                min_bound: mb,
            });
        }
    }
    Ok(ExcessRiskOutput { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub family: Family,
    pub k: usize,
    pub approx_error: f64,
    pub d_eff: f64,
    pub excess_risk_median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CsvRow for CompareRow {
    const HEADER: &'static [&'static str] = &[
        "family",
        "k",
        "approx_error",
        "d_eff",
        "excess_risk_median",
        "ci_low",
        "ci_high",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.family.name().to_string(),
            self.k.to_string(),
            num(self.approx_error),
            num(self.d_eff),
            num(self.excess_risk_median),
            num(self.ci_low),
            num(self.ci_high),
        ]
    }
}

/// Smallest `k` reaching an approximation-error level, and `d_eff` there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEntry {
    pub family: Family,
    pub epsilon: f64,
    pub k_bar: Option<usize>,
    pub d_eff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareOutput {
    pub graph: String,
    pub reward: String,
    /// Mean squared value, the scale of the thresholds below.
    pub value_scale: f64,
    pub rows: Vec<CompareRow>,
    pub thresholds: Vec<ThresholdEntry>,
}

/// Thresholds as fractions of `||V||^2 / S`.
pub const COMPARE_EPSILONS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6];

pub fn compare_reps(config: &ExperimentConfig) -> CliResult<CompareOutput> {
    let (entry, reward) = match (config.graphs.as_slice(), config.rewards.as_slice()) {
        ([g], [r]) => (g, r),
        _ => {
            return Err(CliError::Config(
                "compare-reps takes exactly one graph and one reward".into(),
            ))
        }
    };
    let case = GraphCase::new(config, entry)?;
    let ks = config.representation.k.values();
    let mdp = case.mdp(reward)?;
    let v = value_function(&mdp)?.values;
    let nu = config.nu.distribution(case.num_states())?;
    let families = &config.representation.families;
    let mut all = Vec::new();
    for &family in families {
        all.extend(family_features(config, &case, &mdp, family, &ks)?);
    }
    let plan = trial_plan(config, &mdp)?;
    let estimates = run_trials_sweep(&mdp, &all, &nu, &plan)?;
    let labels = families.iter().flat_map(|&f| ks.iter().map(move |&k| (f, k)));
    let rows = labels
        .zip(&all)
        .zip(estimates)
        .map(|(((family, k), phi), est)| {
            Ok(CompareRow {
                family,
                k,
                approx_error: approximation_error(phi, &v)?,
                d_eff: effective_dimension(phi)?,
                excess_risk_median: est.median,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let value_scale = v.norm_squared() / v.len() as f64;
    let mut thresholds = Vec::new();
    for &family in families {
        let block: Vec<&CompareRow> = rows.iter().filter(|r| r.family == family).collect();
        let errors: Vec<f64> = block.iter().map(|r| r.approx_error).collect();
        for frac in COMPARE_EPSILONS {
            let epsilon = frac * value_scale;
            let kb = k_bar(&errors, epsilon);
            thresholds.push(ThresholdEntry {
                family,
                epsilon,
                k_bar: kb.map(|i| block[i - 1].k),
                d_eff: kb.map(|i| block[i - 1].d_eff),
            });
        }
    }
    Ok(CompareOutput {
        graph: case.name().to_string(),
        reward: reward.kind.label(),
        value_scale,
        rows,
        thresholds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditOutput {
    pub all_pass: Option<bool>,
    pub reports: Vec<AuditReport>,
}

pub fn audit(config: &ExperimentConfig) -> CliResult<AuditOutput> {
    let cells = config.audit.cells.clone().unwrap_or_else(default_audit_matrix);
    let per_cell: Vec<Vec<AuditReport>> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| run_audit_cell(cell, config.audit.trials, rng::derive_seed(config.seed, i as u64)))
        .collect::<repgen_core::Result<_>>()?;
    let reports: Vec<AuditReport> = per_cell.into_iter().flatten().collect();
    let all_pass = reports
        .iter()
        .map(|r| r.pass)
        .collect::<Option<Vec<bool>>>()
        .map(|v| v.into_iter().all(|p| p));
    Ok(AuditOutput { all_pass, reports })
}
