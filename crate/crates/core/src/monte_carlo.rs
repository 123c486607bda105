//! Batch Monte Carlo policy evaluation by least squares on sampled returns.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::format_f64;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::{self, TabularMdp};
use crate::risk::SamplingDistribution;
use crate::rng::{self, StreamRng};

const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Default rollout truncation tolerance as a fraction of `V_max`.
pub const DEFAULT_TRUNCATION_FRACTION: f64 = 1e-4;

/// `n` sampled states and their truncated discounted returns.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutDataset {
    pub states: Vec<usize>,
    pub returns: Vector,
    pub nu: SamplingDistribution,
    pub horizon: usize,
    pub seed: u64,
}

impl RolloutDataset {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Smallest `T` with `gamma^T V_max <= eps`, i.e.
/// `ceil(log(eps (1 - gamma) / R_max) / log gamma)`, and at least 1.
pub fn horizon_for_tolerance(discount: f64, r_max: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("truncation tolerance must be positive, got {eps}")));
    }
    if discount == 0.0 {
        return Ok(1);
    }
    let ratio = eps * (1.0 - discount) / r_max;
    if ratio >= 1.0 {
        return Ok(1);
    }
    Ok(((ratio.ln() / discount.ln()).ceil() as usize).max(1))
}

/// Horizon for the default tolerance `1e-4 V_max`.
pub fn default_horizon(mdp: &TabularMdp) -> usize {
    horizon_for_tolerance(mdp.discount(), mdp.r_max(), DEFAULT_TRUNCATION_FRACTION * mdp.v_max())
        .expect("positive default tolerance")
}

/// Row-wise inverse-CDF sampler over the nonzero entries of `P`.
struct TransitionSampler {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl TransitionSampler {
    fn new(p: &Matrix) -> Self {
        let mut targets = Vec::with_capacity(p.nrows());
        let mut cumulative = Vec::with_capacity(p.nrows());
        for row in p.row_iter() {
            let mut t = Vec::new();
            let mut c = Vec::new();
            let mut acc = 0.0;
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    t.push(j);
                    c.push(acc);
                }
            }
            targets.push(t);
            cumulative.push(c);
        }
        Self { targets, cumulative }
    }

    fn step(&self, s: usize, rng: &mut StreamRng) -> usize {
        let targets = &self.targets[s];
        if targets.len() == 1 {
            return targets[0];
        }
        let c = &self.cumulative[s];
        let u = rng.random::<f64>() * c[c.len() - 1];
        let idx = c.partition_point(|&x| x <= u).min(targets.len() - 1);
        targets[idx]
    }
}

fn draw_states(nu: &SamplingDistribution, n: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    if nu.is_uniform() {
        let s = nu.num_states();
        return Ok((0..n).map(|_| rng.random_range(0..s)).collect());
    }
    let dist = WeightedIndex::new(nu.probabilities().iter().copied())
        .map_err(|e| Error::InvalidArgument(format!("sampling distribution: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Draws `n` states from `nu` (with replacement) and rolls out a length-`T`
/// trajectory from each. Rollout `i` uses its own stream derived from
/// `(seed, i)`.
pub fn sample_dataset(
    mdp: &TabularMdp,
    nu: &SamplingDistribution,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<RolloutDataset> {
    check_common(mdp.num_states(), nu, n)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let sampler = TransitionSampler::new(mdp.transition());
    let mut state_rng = rng::stream(seed);
    let states = draw_states(nu, n, &mut state_rng)?;
    let r = mdp.reward();
    let gamma = mdp.discount();
    let returns = states
        .iter()
        .enumerate()
        .map(|(i, &start)| {
            let mut rng = rng::child_stream(seed, i as u64);
            let mut s = start;
            let mut discount = 1.0;
            let mut total = 0.0;
            for t in 0..horizon {
                total += discount * r[s];
                discount *= gamma;
                if t + 1 < horizon {
                    s = sampler.step(s, &mut rng);
                }
            }
            total
        })
        .collect::<Vec<_>>();
    Ok(RolloutDataset {
        states,
        returns: Vector::from_vec(returns),
        nu: nu.clone(),
        horizon,
        seed,
    })
}

/// Regression data with exact targets plus iid `N(0, sigma^2)` noise.
pub fn gaussian_dataset(
    truth: &Vector,
    nu: &SamplingDistribution,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<RolloutDataset> {
    check_common(truth.len(), nu, n)?;
    let mut rng = rng::stream(seed);
    let states = draw_states(nu, n, &mut rng)?;
    let returns = states
        .iter()
        .map(|&s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            truth[s] + sigma * z
        })
        .collect::<Vec<_>>();
    Ok(RolloutDataset {
        states,
        returns: Vector::from_vec(returns),
        nu: nu.clone(),
        horizon: 0,
        seed,
    })
}

fn check_common(num_states: usize, nu: &SamplingDistribution, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if nu.num_states() != num_states {
        return Err(Error::InvalidArgument(format!(
            "sampling distribution has {} states, MDP has {num_states}",
            nu.num_states()
        )));
    }
    Ok(())
}

/// Minimum-norm least-squares weights on the sampled feature rows.
pub fn fit_erm(phi: &FeatureMatrix, data: &RolloutDataset) -> Result<Vector> {
    let s = phi.num_states();
    if let Some(&bad) = data.states.iter().find(|&&x| x >= s) {
        return Err(Error::InvalidArgument(format!("sampled state {bad} out of range for {s} states")));
    }
    let features = phi.phi();
    let design = Matrix::from_fn(data.len(), phi.k(), |i, j| features[(data.states[i], j)]);
    linalg::least_squares_minnorm(&design, &data.returns)
}

/// `(1/S) ||Phi w - V||^2`.
pub fn empirical_excess_risk(phi: &FeatureMatrix, w: &Vector, truth: &Vector) -> Result<f64> {
    let err = prediction_error(phi, w, truth)?;
    Ok(err.norm_squared() / truth.len() as f64)
}

/// `sum_s nu(s) (Phi w - V)(s)^2`.
pub fn weighted_excess_risk(phi: &FeatureMatrix, w: &Vector, truth: &Vector, nu: &SamplingDistribution) -> Result<f64> {
    let err = prediction_error(phi, w, truth)?;
    Ok(err.iter().zip(nu.probabilities().iter()).map(|(e, p)| p * e * e).sum())
}

fn prediction_error(phi: &FeatureMatrix, w: &Vector, truth: &Vector) -> Result<Vector> {
    if w.len() != phi.k() || truth.len() != phi.num_states() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: Phi is {}x{}, w has {}, V has {}",
            phi.num_states(),
            phi.k(),
            w.len(),
            truth.len()
        )));
    }
    Ok(phi.phi() * w - truth)
}

/// Repetition schedule. Trial `t` uses seed `base_seed + t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub horizon: usize,
}

impl TrialPlan {
    pub fn trial_seed(&self, t: usize) -> u64 {
        self.base_seed.wrapping_add(t as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessRiskEstimate {
    pub per_trial: Vec<f64>,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
}

impl ExcessRiskEstimate {
    /// Median with a 95% percentile-bootstrap interval for it.
    pub fn from_trials(per_trial: Vec<f64>, seed: u64) -> Result<Self> {
        if per_trial.is_empty() {
            return Err(Error::InvalidArgument("at least one trial is required".into()));
        }
        let median = median(&per_trial);
        let (mut lo, mut hi) = (median, median);
        if per_trial.len() > 1 {
            let mut rng = rng::stream(rng::derive_seed(seed, 0xB007));
            let mut resample = vec![0.0; per_trial.len()];
            let mut medians: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
                .map(|_| {
                    for x in resample.iter_mut() {
                        *x = per_trial[rng.random_range(0..per_trial.len())];
                    }
                    self::median(&resample)
                })
                .collect();
            medians.sort_by(f64::total_cmp);
            lo = percentile(&medians, 0.025).min(median);
            hi = percentile(&medians, 0.975).max(median);
        }
        Ok(Self {
            trials: per_trial.len(),
            per_trial,
            median,
            ci_low: lo,
            ci_high: hi,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_plan(plan: &TrialPlan) -> Result<()> {
    if plan.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

pub fn run_trials(
    mdp: &TabularMdp,
    phi: &FeatureMatrix,
    nu: &SamplingDistribution,
    plan: &TrialPlan,
) -> Result<ExcessRiskEstimate> {
    let mut out = run_trials_sweep(mdp, std::slice::from_ref(phi), nu, plan)?;
    Ok(out.remove(0))
}

/// Like [`run_trials`] for several representations at once; each trial's
/// dataset is shared by all of them. Risk is measured in the `nu`-weighted
/// norm.
pub fn run_trials_sweep(
    mdp: &TabularMdp,
    phis: &[FeatureMatrix],
    nu: &SamplingDistribution,
    plan: &TrialPlan,
) -> Result<Vec<ExcessRiskEstimate>> {
    check_plan(plan)?;
    let truth = mdp::value_function(mdp)?.values;
    let per_trial: Vec<Vec<f64>> = (0..plan.trials)
        .into_par_iter()
        .map(|t| {
            let data = sample_dataset(mdp, nu, plan.n, plan.horizon, plan.trial_seed(t))?;
            phis.iter()
                .map(|phi| {
                    let w = fit_erm(phi, &data)?;
                    if nu.is_uniform() {
                        empirical_excess_risk(phi, &w, &truth)
                    } else {
                        weighted_excess_risk(phi, &w, &truth, nu)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    (0..phis.len())
        .map(|j| {
            let values = per_trial.iter().map(|row| row[j]).collect();
            ExcessRiskEstimate::from_trials(values, plan.base_seed)
        })
        .collect()
}

/// Writes `trial,sample_index,state,return` rows.
pub fn write_datasets_csv<W: Write>(out: W, datasets: &[(usize, &RolloutDataset)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(["trial", "sample_index", "state", "return"]).map_err(csv_err)?;
    for (trial, data) in datasets {
        for (i, (&s, &y)) in data.states.iter().zip(data.returns.iter()).enumerate() {
            w.write_record([trial.to_string(), i.to_string(), s.to_string(), format_f64(y)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
