//! Monte Carlo checks of the concentration inequalities behind the
//! general-distribution excess-risk bound.
//!
//! Each audit draws `n` states from `nu` per trial, forms the exact random
//! object the inequality controls, and counts how often the stated event
//! fails. An audit passes when the failure rate is at most
//! `delta + 3 sqrt(delta (1 - delta) / trials)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{build_graph_mdp, GraphKind, GraphSpec, RewardSpec};
use crate::linalg::{self, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::mdp::value_function;
use crate::representations::SrSpectrum;
use crate::risk::{effective_dimension, whitened_rows, SamplingDistribution};
use crate::rng::{self, StreamRng};

/// Upper end (exclusive) of the admissible `delta` range for the vector
/// Bernstein tail, `e^{-1/8}`.
pub fn bernstein_delta_limit() -> f64 {
    (-0.125f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    MatrixChernoff,
    VectorBernstein,
    HansonWright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub num_states: usize,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lemma: Lemma,
    pub trials: usize,
    pub failures: usize,
    pub delta: f64,
    pub failure_rate: f64,
    /// Three binomial standard deviations.
    pub slack: f64,
    /// `None` when fewer than two trials make the rate meaningless.
    pub pass: Option<bool>,
    /// Event threshold; for the Hanson-Wright audit this is proportional to
    /// `sigma^2`.
    pub threshold: f64,
    pub precondition_met: bool,
    pub config: AuditConfig,
}

impl AuditReport {
    fn new(
        lemma: Lemma,
        failures: usize,
        trials: usize,
        delta: f64,
        threshold: f64,
        precondition_met: bool,
        config: AuditConfig,
    ) -> Self {
        let slack = 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
        let failure_rate = failures as f64 / trials as f64;
        Self {
            lemma,
            trials,
            failures,
            delta,
            failure_rate,
            slack,
            pass: (trials >= 2).then_some(failure_rate <= delta + slack),
            threshold,
            precondition_met,
            config,
        }
    }
}

/// Shared per-audit state: whitened rows and a state sampler.
struct Sampler {
    rows: Matrix,
    weights: Option<WeightedIndex<f64>>,
    num_states: usize,
}

impl Sampler {
    fn new(phi: &FeatureMatrix, nu: &SamplingDistribution) -> Result<Self> {
        if nu.num_states() != phi.num_states() {
            return Err(Error::InvalidArgument(format!(
                "sampling distribution has {} states, features have {}",
                nu.num_states(),
                phi.num_states()
            )));
        }
        let weights = if nu.is_uniform() {
            None
        } else {
            Some(
                WeightedIndex::new(nu.probabilities().iter().copied())
                    .map_err(|e| Error::InvalidArgument(format!("sampling distribution: {e}")))?,
            )
        };
        Ok(Self {
            rows: whitened_rows(phi, nu)?,
            weights,
            num_states: phi.num_states(),
        })
    }

    fn draw(&self, rng: &mut StreamRng) -> usize {
        match &self.weights {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..self.num_states),
        }
    }

    fn counts(&self, n: usize, rng: &mut StreamRng) -> Vector {
        let mut counts = Vector::zeros(self.num_states);
        for _ in 0..n {
            counts[self.draw(rng)] += 1.0;
        }
        counts
    }

    /// `Y_n = sum_i u_{s_i} u_{s_i}^T = U^T diag(counts) U`.
    fn gram(&self, counts: &Vector) -> Matrix {
        let mut weighted = self.rows.clone();
        for (mut row, c) in weighted.row_iter_mut().zip(counts.iter()) {
            row *= *c;
        }
        self.rows.transpose() * weighted
    }
}

fn check_common(n: usize, delta: f64, trials: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn base_config(phi: &FeatureMatrix, n: usize, seed: u64) -> AuditConfig {
    AuditConfig {
        num_states: phi.num_states(),
        k: phi.rank(),
        n,
        seed,
        graph: None,
        gamma: None,
    }
}

fn leverage_factor(phi: &FeatureMatrix, nu: &SamplingDistribution) -> Result<f64> {
    Ok(effective_dimension(phi)? / (nu.nu_min() * phi.num_states() as f64))
}

/// Sample size at which the eigenvalue sandwich is guaranteed:
/// `8 d_eff / (nu_min S) log(2k / delta)`.
pub fn chernoff_sample_size(phi: &FeatureMatrix, nu: &SamplingDistribution, delta: f64) -> Result<f64> {
    let k = phi.rank() as f64;
    Ok(8.0 * leverage_factor(phi, nu)? * (2.0 * k / delta).ln())
}

fn count_failures(trials: usize, seed: u64, fail: impl Fn(&mut StreamRng) -> bool + Sync) -> usize {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::child_stream(seed, t as u64);
            usize::from(fail(&mut rng))
        })
        .sum()
}

/// Counts trials where `(n/2) I <= Y_n <= 4n I` fails.
pub fn audit_matrix_chernoff(
    phi: &FeatureMatrix,
    nu: &SamplingDistribution,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    check_common(n, delta, trials)?;
    let sampler = Sampler::new(phi, nu)?;
    let nf = n as f64;
    let failures = count_failures(trials, seed, |rng| {
        let y = sampler.gram(&sampler.counts(n, rng));
        let eig = linalg::symmetric_eigenvalues(&y);
        eig[0] < nf / 2.0 || eig[eig.len() - 1] > 4.0 * nf
    });
    let precondition = nf >= chernoff_sample_size(phi, nu, delta)?;
    Ok(AuditReport::new(
        Lemma::MatrixChernoff,
        failures,
        trials,
        delta,
        nf / 2.0,
        precondition,
        base_config(phi, n, seed),
    ))
}

/// Counts trials where `||z_n||_2` exceeds the Bernstein threshold, with
/// `z_n = sum_i u_{s_i} rho(s_i)` and
/// `rho = N^{-1/2} P_perp(N^{1/2} Phi) N^{1/2} V`.
pub fn audit_vector_bernstein(
    phi: &FeatureMatrix,
    nu: &SamplingDistribution,
    target: &Vector,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    check_common(n, delta, trials)?;
    if delta >= bernstein_delta_limit() {
        return Err(Error::InvalidArgument(format!(
            "delta = {delta} is outside the admissible range (0, {:.6})",
            bernstein_delta_limit()
        )));
    }
    if target.len() != phi.num_states() {
        return Err(Error::InvalidArgument("target length mismatch".into()));
    }
    let sampler = Sampler::new(phi, nu)?;
    let sqrt_nu = nu.probabilities().map(f64::sqrt);
    let mut weighted_phi = phi.phi().clone();
    for (mut row, w) in weighted_phi.row_iter_mut().zip(sqrt_nu.iter()) {
        row *= *w;
    }
    let basis = linalg::column_space_basis(&weighted_phi, DEFAULT_RANK_TOL)?;
    let scaled_target = target.component_mul(&sqrt_nu);
    let mut residual = basis.residual(&scaled_target);
    // A target inside the span should give an exactly zero statistic.
    if residual.norm() <= 1e-12 * scaled_target.norm().max(f64::MIN_POSITIVE) {
        residual.fill(0.0);
    }
    let rho = residual.component_div(&sqrt_nu);

    let nf = n as f64;
    let factor = leverage_factor(phi, nu)?;
    let log = (1.0 / delta).ln();
    let threshold = 2.0 * (8.0 * nf * factor).sqrt() * residual.norm() * log.sqrt()
        + 4.0 / 3.0 * factor.sqrt() * rho.amax() * log;
    let failures = count_failures(trials, seed, |rng| {
        let counts = sampler.counts(n, rng);
        let z = sampler.rows.transpose() * counts.component_mul(&rho);
        z.norm() > threshold
    });
    Ok(AuditReport::new(
        Lemma::VectorBernstein,
        failures,
        trials,
        delta,
        threshold,
        true,
        base_config(phi, n, seed),
    ))
}

/// Counts trials where `lambda_max(Y_n) <= 4n` holds and yet
/// `||sum_i u_{s_i} eta_i||^2 > sigma^2 n (8k + 12 log(1/delta))`,
/// with `eta_i ~ N(0, sigma^2)`.
pub fn audit_hanson_wright(
    phi: &FeatureMatrix,
    nu: &SamplingDistribution,
    n: usize,
    sigma: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    check_common(n, delta, trials)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let sampler = Sampler::new(phi, nu)?;
    let nf = n as f64;
    let k = phi.rank() as f64;
    let threshold = sigma * sigma * nf * (8.0 * k + 12.0 * (1.0 / delta).ln());
    let failures = count_failures(trials, seed, |rng| {
        let mut counts = Vector::zeros(sampler.num_states);
        let mut noise = Vector::zeros(sampler.num_states);
        for _ in 0..n {
            let s = sampler.draw(rng);
            let z: f64 = StandardNormal.sample(rng);
            counts[s] += 1.0;
            noise[s] += sigma * z;
        }
        let y = sampler.gram(&counts);
        let eig = linalg::symmetric_eigenvalues(&y);
        let capped = eig[eig.len() - 1] <= 4.0 * nf;
        capped && (sampler.rows.transpose() * noise).norm_squared() > threshold
    });
    Ok(AuditReport::new(
        Lemma::HansonWright,
        failures,
        trials,
        delta,
        threshold,
        true,
        base_config(phi, n, seed),
    ))
}

/// One configuration of the standard audit sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub graph: GraphKind,
    pub num_states: usize,
    pub gamma: f64,
    pub k: usize,
    pub delta: f64,
    pub sigma: f64,
    pub reward_seed: u64,
}

/// `{torus1d, star, open-room}` with `S = 64`, `k in {1, 5, 10}` and
/// `delta in {0.05, 0.1}`.
pub fn default_audit_matrix() -> Vec<AuditCell> {
    let mut cells = Vec::new();
    for graph in [GraphKind::Torus1d, GraphKind::Star, GraphKind::OpenRoom] {
        for k in [1, 5, 10] {
            for delta in [0.05, 0.1] {
                cells.push(AuditCell {
                    graph,
                    num_states: 64,
                    gamma: 0.9,
                    k,
                    delta,
                    sigma: 1.0,
                    reward_seed: 7,
                });
            }
        }
    }
    cells
}

/// Runs all three audits on the SR features `F_k` of the cell's graph, with
/// uniform sampling and `n` set to the matrix Chernoff sample size.
pub fn run_audit_cell(cell: &AuditCell, trials: usize, seed: u64) -> Result<Vec<AuditReport>> {
    let spec = GraphSpec::new(cell.graph, cell.num_states, cell.gamma);
    let mdp = build_graph_mdp(&spec, &RewardSpec::gaussian(cell.reward_seed))?;
    let phi = SrSpectrum::new(&mdp)?.features(cell.k)?;
    let v = value_function(&mdp)?.values;
    let nu = SamplingDistribution::uniform(cell.num_states);
    let n = chernoff_sample_size(&phi, &nu, cell.delta)?.ceil().max(1.0) as usize;
    let mut reports = vec![
        audit_matrix_chernoff(&phi, &nu, n, cell.delta, trials, rng::derive_seed(seed, 1))?,
        audit_vector_bernstein(&phi, &nu, &v, n, cell.delta, trials, rng::derive_seed(seed, 2))?,
        audit_hanson_wright(&phi, &nu, n, cell.sigma, cell.delta, trials, rng::derive_seed(seed, 3))?,
    ];
    for r in &mut reports {
        r.config.graph = Some(cell.graph.name().to_string());
        r.config.gamma = Some(cell.gamma);
    }
    Ok(reports)
}
