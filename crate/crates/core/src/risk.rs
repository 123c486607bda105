//! Effective dimension, approximation error and excess-risk bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{self, Matrix, SpectralDecomposition, Vector, DEFAULT_RANK_TOL};

const DISTRIBUTION_TOL: f64 = 1e-12;

/// State-sampling distribution `nu` with every state reachable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SamplingDistribution {
    nu: Vector,
    nu_min: f64,
}

impl SamplingDistribution {
    pub fn new(nu: Vector) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::InvalidArgument("sampling distribution is empty".into()));
        }
        if let Some(i) = nu.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(format!("nu[{i}] = {} is not a probability", nu[i])));
        }
        let total = nu.sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(Error::InvalidArgument(format!("nu sums to {total}, not 1")));
        }
        let nu_min = nu.min();
        if nu_min <= 0.0 {
            let i = nu.iter().position(|x| *x <= 0.0).unwrap_or(0);
            return Err(Error::Assumption(format!(
                "state {i} has zero sampling probability"
            )));
        }
        Ok(Self { nu, nu_min })
    }

    pub fn uniform(num_states: usize) -> Self {
        let p = 1.0 / num_states as f64;
        Self {
            nu: Vector::from_element(num_states, p),
            nu_min: p,
        }
    }

    pub fn probabilities(&self) -> &Vector {
        &self.nu
    }

    pub fn nu_min(&self) -> f64 {
        self.nu_min
    }

    pub fn num_states(&self) -> usize {
        self.nu.len()
    }

    pub fn is_uniform(&self) -> bool {
        let p = 1.0 / self.nu.len() as f64;
        self.nu.iter().all(|&x| x == p)
    }
}

impl TryFrom<Vec<f64>> for SamplingDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(Vector::from_vec(v))
    }
}

impl From<SamplingDistribution> for Vec<f64> {
    fn from(d: SamplingDistribution) -> Self {
        d.nu.as_slice().to_vec()
    }
}

/// `S * max_i ||P_Phi e_i||^2`, the largest leverage score scaled by `S`.
pub fn effective_dimension(phi: &FeatureMatrix) -> Result<f64> {
    let basis = phi.basis();
    if basis.rank() == 0 {
        return Err(Error::InvalidArgument(
            "effective dimension is undefined for a zero feature matrix".into(),
        ));
    }
    Ok(phi.num_states() as f64 * basis.leverage_scores().max())
}

/// `d_eff / rank`.
pub fn coherence(phi: &FeatureMatrix) -> Result<f64> {
    Ok(effective_dimension(phi)? / phi.rank() as f64)
}

/// `(1/S) ||P_perp V||^2`.
pub fn approximation_error(phi: &FeatureMatrix, target: &Vector) -> Result<f64> {
    check_len(phi, target)?;
    Ok(phi.basis().residual(target).norm_squared() / target.len() as f64)
}

fn check_len(phi: &FeatureMatrix, target: &Vector) -> Result<()> {
    if phi.num_states() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "target has length {} for {} states",
            target.len(),
            phi.num_states()
        )));
    }
    Ok(())
}

/// `r = b_{k+1} R_max / ||b_{k+1}||_inf`, the reward that excites the first
/// discarded singular direction.
pub fn worst_case_reward(decomp: &SpectralDecomposition, k: usize, r_max: f64) -> Result<Vector> {
    if k >= decomp.len() {
        return Err(Error::InvalidArgument(format!(
            "no discarded direction for k = {k} of {}",
            decomp.len()
        )));
    }
    let b = decomp.right.column(k);
    Ok(b * (r_max / b.amax()))
}

/// `|| (B_k^perp)^T e_i ||^2` for every `i`.
fn discarded_right_leverage(decomp: &SpectralDecomposition, k: usize) -> Vector {
    let tail = decomp.right.columns(k, decomp.len() - k);
    Vector::from_iterator(
        tail.nrows(),
        tail.row_iter().map(|row| row.norm_squared()),
    )
}

/// `sigma_{k+1}^2 R_max^2 d_eff(B_k^perp) / S`; zero when `k = S`.
pub fn one_hot_approx_bound(decomp: &SpectralDecomposition, k: usize, state: usize, r_max: f64) -> Result<f64> {
    let s = decomp.len();
    if state >= s {
        return Err(Error::InvalidArgument(format!("state {state} out of range for {s} states")));
    }
    if k >= s {
        return Ok(0.0);
    }
    let sigma = decomp.singular_values[k];
    let d_eff = s as f64 * discarded_right_leverage(decomp, k).max();
    Ok(sigma * sigma * r_max * r_max * d_eff / s as f64)
}

/// Exact approximation error of `Psi R_max e_i` by the top-`k` left singular
/// vectors: `(R_max^2 / S) sum_{j > k} sigma_j^2 B_ij^2`.
pub fn one_hot_approx_exact(decomp: &SpectralDecomposition, k: usize, state: usize, r_max: f64) -> Result<f64> {
    let s = decomp.len();
    if state >= s {
        return Err(Error::InvalidArgument(format!("state {state} out of range for {s} states")));
    }
    let tail: f64 = (k..s)
        .map(|j| (decomp.singular_values[j] * decomp.right[(state, j)]).powi(2))
        .sum();
    Ok(r_max * r_max * tail / s as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationTerms {
    #[serde(rename = "est_coupling")]
    pub coupling: f64,
    #[serde(rename = "est_variance")]
    pub variance: f64,
    #[serde(rename = "est_high_order")]
    pub high_order: f64,
}

impl EstimationTerms {
    pub fn sum(&self) -> f64 {
        self.coupling + self.variance + self.high_order
    }
}

/// Every ingredient of the high-probability excess-risk bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBoundReport {
    pub approx_error: f64,
    #[serde(flatten)]
    pub estimation_terms: EstimationTerms,
    pub total: f64,
    pub d_eff: f64,
    pub coherence: f64,
    pub n_min: f64,
    pub valid: bool,
    pub delta: f64,
    pub n: usize,
    pub sigma: f64,
    pub rank: usize,
}

struct BoundInputs {
    approx: f64,
    /// `d_eff / (nu_min S)`; equals `d_eff` for uniform sampling.
    leverage: f64,
    residual_sup: f64,
    d_eff: f64,
    rank: usize,
}

fn assemble(inputs: BoundInputs, n: usize, delta: f64, sigma: f64) -> Result<RiskBoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let BoundInputs {
        approx,
        leverage,
        residual_sup,
        d_eff,
        rank,
    } = inputs;
    let c = (3.0 / delta).ln();
    let nf = n as f64;
    let k = rank as f64;
    let terms = EstimationTerms {
        coupling: 384.0 * c * leverage / nf * approx,
        variance: 48.0 * sigma * sigma * (2.0 * k + 3.0 * c) / nf,
        high_order: 64.0 / 3.0 * leverage / (nf * nf) * residual_sup * residual_sup * c * c,
    };
    let n_min = 8.0 * leverage * (6.0 * k / delta).ln();
    Ok(RiskBoundReport {
        approx_error: approx,
        total: approx + terms.sum(),
        estimation_terms: terms,
        d_eff,
        coherence: d_eff / k,
        n_min,
        valid: nf >= n_min,
        delta,
        n,
        sigma,
        rank,
    })
}

/// Bound for uniform state sampling. `k` is taken as `rank(Phi)`.
pub fn theorem1_bound(phi: &FeatureMatrix, target: &Vector, n: usize, delta: f64, sigma: f64) -> Result<RiskBoundReport> {
    check_len(phi, target)?;
    let d_eff = effective_dimension(phi)?;
    let residual = phi.basis().residual(target);
    let inputs = BoundInputs {
        approx: residual.norm_squared() / target.len() as f64,
        leverage: d_eff,
        residual_sup: residual.amax(),
        d_eff,
        rank: phi.rank(),
    };
    assemble(inputs, n, delta, sigma)
}

/// Bound for a general sampling distribution, built from the projector onto
/// `range(N^{1/2} Phi)` with `N = diag(nu)`.
pub fn theorem_a2_bound(
    phi: &FeatureMatrix,
    target: &Vector,
    n: usize,
    delta: f64,
    sigma: f64,
    nu: &SamplingDistribution,
) -> Result<RiskBoundReport> {
    check_len(phi, target)?;
    let s = phi.num_states();
    if nu.num_states() != s {
        return Err(Error::InvalidArgument(format!(
            "sampling distribution has {} states, features have {s}",
            nu.num_states()
        )));
    }
    let d_eff = effective_dimension(phi)?;
    let sqrt_nu = nu.probabilities().map(f64::sqrt);
    let mut weighted = phi.phi().clone();
    for (mut row, w) in weighted.row_iter_mut().zip(sqrt_nu.iter()) {
        row *= *w;
    }
    let basis = linalg::column_space_basis(&weighted, DEFAULT_RANK_TOL)?;
    let residual = basis.residual(&target.component_mul(&sqrt_nu));
    let residual_sup = residual
        .iter()
        .zip(sqrt_nu.iter())
        .map(|(r, w)| (r / w).abs())
        .fold(0.0, f64::max);
    let inputs = BoundInputs {
        approx: residual.norm_squared(),
        leverage: d_eff / (nu.nu_min() * s as f64),
        residual_sup,
        d_eff,
        rank: phi.rank(),
    };
    assemble(inputs, n, delta, sigma)
}

/// `||P_perp V||_unif^2 + d_eff/n + d_eff/n^2 ||P_perp V||_inf^2`, the bound
/// with constants and logarithms dropped.
pub fn heuristic_excess_risk(phi: &FeatureMatrix, target: &Vector, n: usize) -> Result<f64> {
    check_len(phi, target)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let d_eff = effective_dimension(phi)?;
    let residual = phi.basis().residual(target);
    let nf = n as f64;
    let sup = residual.amax();
    Ok(residual.norm_squared() / target.len() as f64 + d_eff / nf + d_eff / (nf * nf) * sup * sup)
}

/// Smallest `k` (1-based) with `errors[k - 1] <= epsilon`.
pub fn k_bar(errors: &[f64], epsilon: f64) -> Option<usize> {
    errors.iter().position(|&e| e <= epsilon).map(|i| i + 1)
}

/// Row `s` is `u_s^T = (Xi^{-1/2} Phi^T e_s)^T` with `Xi = Phi^T N Phi`, up to
/// a fixed rotation of the feature space.
pub(crate) fn whitened_rows(phi: &FeatureMatrix, nu: &SamplingDistribution) -> Result<Matrix> {
    let k = phi.basis().rank();
    if k == 0 {
        return Err(Error::InvalidArgument("zero feature matrix".into()));
    }
    // Any basis of range(Phi) gives the same whitened rows up to rotation.
    let q = phi.basis().q();
    let mut weighted = q.clone();
    for (mut row, w) in weighted.row_iter_mut().zip(nu.probabilities().iter()) {
        row *= *w;
    }
    let xi = q.transpose() * weighted;
    let xi_inv_sqrt = linalg::symmetric_inverse_sqrt(&xi)?;
    Ok(q * xi_inv_sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Family, Provenance};
    use crate::graph::{build_graph_mdp, GraphKind, GraphSpec, RewardSpec};
    use crate::mdp::{return_statistics, value_function};
    use crate::representations::{random_features, SrSpectrum};
    use proptest::prelude::*;

    fn custom(phi: Matrix) -> FeatureMatrix {
        FeatureMatrix::new(phi, Family::Custom, Provenance::default()).unwrap()
    }

    /// Real Fourier basis on a cycle of `s` states: the constant plus the
    /// first `pairs` cos/sin pairs, orthonormal.
    fn fourier(s: usize, pairs: usize) -> Matrix {
        let mut cols = vec![Vector::from_element(s, 1.0 / (s as f64).sqrt())];
        for f in 1..=pairs {
            let w = 2.0 * std::f64::consts::PI * f as f64 / s as f64;
            let scale = (2.0 / s as f64).sqrt();
            cols.push(Vector::from_fn(s, |i, _| scale * (w * i as f64).cos()));
            cols.push(Vector::from_fn(s, |i, _| scale * (w * i as f64).sin()));
        }
        Matrix::from_columns(&cols)
    }

    #[test]
    fn effective_dimension_examples() {
        assert!((effective_dimension(&FeatureMatrix::tabular(4).unwrap()).unwrap() - 4.0).abs() < 1e-12);
        let ones = custom(Matrix::from_element(5, 1, 1.0));
        assert!((effective_dimension(&ones).unwrap() - 1.0).abs() < 1e-12);
        assert!((coherence(&ones).unwrap() - 1.0).abs() < 1e-12);
        // Each row of the cos/sin pair has squared norm (2/S)(cos^2 + sin^2).
        let f = custom(fourier(8, 1));
        assert!((effective_dimension(&f).unwrap() - 3.0).abs() < 1e-12);

        let mut e1 = Matrix::zeros(4, 1);
        e1[(0, 0)] = 1.0;
        assert!((coherence(&custom(e1)).unwrap() - 4.0).abs() < 1e-12);

        let zero = custom(Matrix::zeros(3, 2));
        assert!(effective_dimension(&zero).is_err());
        assert!(coherence(&zero).is_err());
    }

    #[test]
    fn random_orthonormal_coherence_is_in_range() {
        let fm = random_features(400, 20, 9).unwrap();
        let mu = coherence(&fm).unwrap();
        assert!((1.0..=20.0).contains(&mu));
    }

    #[test]
    fn approximation_error_examples() {
        let full = random_features(6, 6, 2).unwrap();
        let v = Vector::from_fn(6, |i, _| (i * i) as f64);
        assert!(approximation_error(&full, &v).unwrap() < 1e-20);

        let ones = custom(Matrix::from_element(2, 1, 1.0));
        let v = Vector::from_row_slice(&[1.0, -1.0]);
        assert!((approximation_error(&ones, &v).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn worst_case_and_one_hot_bounds_on_torus() {
        for (kind, s) in [(GraphKind::Torus1d, 30), (GraphKind::Torus2d, 36)] {
            let mdp = build_graph_mdp(&GraphSpec::new(kind, s, 0.9), &RewardSpec::all_ones()).unwrap();
            let spec = SrSpectrum::new(&mdp).unwrap();
            let d = &spec.decomposition;
            for k in 1..s {
                let fm = spec.features(k).unwrap();
                let r = worst_case_reward(d, k, 1.0).unwrap();
                assert!((r.amax() - 1.0).abs() < 1e-12);
                let v = &spec.successor.psi * &r;
                let err = approximation_error(&fm, &v).unwrap();
                assert!(err <= d.singular_values[k].powi(2) + 1e-8);

                for i in [0, s / 2, s - 1] {
                    let v = spec.successor.psi.column(i).into_owned();
                    let err = approximation_error(&fm, &v).unwrap();
                    let exact = one_hot_approx_exact(d, k, i, 1.0).unwrap();
                    assert!((err - exact).abs() <= 1e-8 * err.max(1.0));
                    assert!(err <= one_hot_approx_bound(d, k, i, 1.0).unwrap() + 1e-8);
                }
            }
        }
    }

    #[test]
    fn one_hot_examples() {
        let mdp = build_graph_mdp(&GraphSpec::new(GraphKind::Torus1d, 50, 0.9), &RewardSpec::one_hot(0)).unwrap();
        let spec = SrSpectrum::new(&mdp).unwrap();
        let v = value_function(&mdp).unwrap().values;
        let err = approximation_error(&spec.features(10).unwrap(), &v).unwrap();
        assert!(err <= one_hot_approx_bound(&spec.decomposition, 10, 0, 1.0).unwrap());
        assert_eq!(one_hot_approx_bound(&spec.decomposition, 50, 0, 1.0).unwrap(), 0.0);

        // Disconnected: Psi = 100 I, so the value of e_i lies in the span iff
        // state i is one of the retained coordinates.
        let mdp = build_graph_mdp(&GraphSpec::new(GraphKind::Disconnected, 8, 0.99), &RewardSpec::all_ones())
            .unwrap();
        let spec = SrSpectrum::new(&mdp).unwrap();
        let fm = spec.features(3).unwrap();
        let kept: Vec<usize> = (0..8).filter(|&i| fm.basis().leverage_scores()[i] > 0.5).collect();
        assert_eq!(kept.len(), 3);
        for i in 0..8 {
            let v = spec.successor.psi.column(i).into_owned();
            let err = approximation_error(&fm, &v).unwrap();
            let expected = if kept.contains(&i) { 0.0 } else { 100.0 * 100.0 / 8.0 };
            assert!((err - expected).abs() < 1e-8);
            assert!((one_hot_approx_exact(&spec.decomposition, 3, i, 1.0).unwrap() - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn theorem1_examples() {
        let s = 10;
        let tab = FeatureMatrix::tabular(s).unwrap();
        let v = Vector::from_fn(s, |i, _| i as f64);
        let (delta, sigma, n) = (0.05, 2.0, 1000);
        let rep = theorem1_bound(&tab, &v, n, delta, sigma).unwrap();
        let c = (3.0f64 / delta).ln();
        assert!(rep.approx_error < 1e-20);
        assert!((rep.estimation_terms.variance - 48.0 * sigma * sigma * (2.0 * s as f64 + 3.0 * c) / n as f64).abs() < 1e-12);
        assert!(rep.estimation_terms.coupling < 1e-15);
        assert!(rep.estimation_terms.high_order < 1e-15);
        assert!((rep.total - rep.approx_error - rep.estimation_terms.sum()).abs() < 1e-15);

        // Estimation terms vanish as n grows.
        let ones = custom(Matrix::from_element(s, 1, 1.0));
        let big = theorem1_bound(&ones, &v, 1 << 40, delta, sigma).unwrap();
        assert!((big.total - big.approx_error).abs() < 1e-8 * big.approx_error);

        assert!(theorem1_bound(&tab, &v, n, 0.0, sigma).is_err());
        assert!(theorem1_bound(&tab, &v, n, 1.0, sigma).is_err());
    }

    #[test]
    fn theorem1_on_torus2d_reports_validity() {
        let mdp = build_graph_mdp(&GraphSpec::new(GraphKind::Torus2d, 400, 0.99), &RewardSpec::gaussian(7)).unwrap();
        let spec = SrSpectrum::new(&mdp).unwrap();
        let fm = spec.features(10).unwrap();
        let v = value_function(&mdp).unwrap().values;
        let sigma = return_statistics(&mdp).sigma_bound;
        let rep = theorem1_bound(&fm, &v, 300, 0.05, sigma).unwrap();
        let d_eff = effective_dimension(&fm).unwrap();
        let n_min = 8.0 * d_eff * (6.0 * 10.0 / 0.05f64).ln();
        assert!((rep.n_min - n_min).abs() < 1e-9);
        assert_eq!(rep.valid, 300.0 >= n_min);
        assert!(rep.total.is_finite());
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["approx_error", "est_coupling", "est_variance", "est_high_order", "total", "d_eff", "coherence", "n_min", "valid"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn general_bound_examples() {
        let mdp = build_graph_mdp(&GraphSpec::new(GraphKind::Chain, 12, 0.9), &RewardSpec::gaussian(3)).unwrap();
        let spec = SrSpectrum::new(&mdp).unwrap();
        let v = value_function(&mdp).unwrap().values;
        let fm = spec.features(4).unwrap();
        let uni = theorem_a2_bound(&fm, &v, 200, 0.1, 3.0, &SamplingDistribution::uniform(12)).unwrap();
        let t1 = theorem1_bound(&fm, &v, 200, 0.1, 3.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(1.0);
        assert!(close(uni.approx_error, t1.approx_error));
        assert!(close(uni.estimation_terms.coupling, t1.estimation_terms.coupling));
        assert!(close(uni.estimation_terms.variance, t1.estimation_terms.variance));
        assert!(close(uni.estimation_terms.high_order, t1.estimation_terms.high_order));
        assert!(close(uni.total, t1.total));
        assert!(close(uni.n_min, t1.n_min));

        let full = SrSpectrum::new(&mdp).unwrap().features(12).unwrap();
        let skewed = SamplingDistribution::new(Vector::from_fn(12, |i, _| if i == 0 { 0.5 } else { 0.5 / 11.0 })).unwrap();
        let rep = theorem_a2_bound(&full, &v, 200, 0.1, 3.0, &skewed).unwrap();
        assert!(rep.approx_error < 1e-18);
    }

    #[test]
    fn concentrated_sampling_inflates_estimation_terms() {
        let phi = custom(Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]));
        let v = Vector::from_row_slice(&[0.0, 1.0, 0.0, 2.0]);
        let uni = theorem_a2_bound(&phi, &v, 100, 0.1, 1.0, &SamplingDistribution::uniform(4)).unwrap();
        let nu = SamplingDistribution::new(Vector::from_row_slice(&[0.97, 0.01, 0.01, 0.01])).unwrap();
        let conc = theorem_a2_bound(&phi, &v, 100, 0.1, 1.0, &nu).unwrap();
        assert!(conc.n_min > uni.n_min);
        assert!(conc.estimation_terms.high_order > uni.estimation_terms.high_order);
        assert!(
            conc.estimation_terms.coupling / conc.approx_error > uni.estimation_terms.coupling / uni.approx_error
        );
    }

    #[test]
    fn sampling_distribution_validation() {
        assert!(matches!(
            SamplingDistribution::new(Vector::from_row_slice(&[0.5, 0.5, 0.0])),
            Err(Error::Assumption(_))
        ));
        assert!(SamplingDistribution::new(Vector::from_row_slice(&[0.5, 0.6])).is_err());
        let d = SamplingDistribution::uniform(4);
        assert_eq!(d.nu_min(), 0.25);
        assert!(d.is_uniform());
    }

    #[test]
    fn heuristic_examples() {
        let full = random_features(7, 7, 1).unwrap();
        let v = Vector::from_fn(7, |i, _| i as f64 - 3.0);
        let d_eff = effective_dimension(&full).unwrap();
        assert!((heuristic_excess_risk(&full, &v, 30).unwrap() - d_eff / 30.0).abs() < 1e-12);
        let ones = custom(Matrix::from_element(7, 1, 1.0));
        let approx = approximation_error(&ones, &v).unwrap();
        assert!((heuristic_excess_risk(&ones, &v, 1 << 40).unwrap() - approx).abs() < 1e-9);
    }

    #[test]
    fn k_bar_examples() {
        assert_eq!(k_bar(&[0.5, 0.2, 0.05], 0.1), Some(3));
        assert_eq!(k_bar(&[0.5, 0.2, 0.05], 0.5), Some(1));
        assert_eq!(k_bar(&[0.5, 0.2], 0.01), None);
        let geometric: Vec<f64> = (1..=20).map(|k| 0.5f64.powi(k)).collect();
        let kb = k_bar(&geometric, 0.01).unwrap();
        assert_eq!(kb, 7);
        assert!(kb as f64 <= (1.0 / (1.0 - 0.5) * (1.0f64 / 0.01).ln()).ceil());
    }

    #[test]
    fn approximation_error_decreases_along_sr_family() {
        let mdp = build_graph_mdp(&GraphSpec::new(GraphKind::Chain, 20, 0.95), &RewardSpec::gaussian(4)).unwrap();
        let spec = SrSpectrum::new(&mdp).unwrap();
        let v = value_function(&mdp).unwrap().values;
        let errs: Vec<f64> = (1..=20)
            .map(|k| approximation_error(&spec.features(k).unwrap(), &v).unwrap())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }

    fn random_matrix() -> impl Strategy<Value = (Matrix, Matrix)> {
        (2usize..25, 0.0f64..1.0).prop_flat_map(|(s, frac)| {
            let k = ((s as f64 * frac) as usize).clamp(1, s);
            (
                proptest::collection::vec(-1.0f64..1.0, s * k),
                proptest::collection::vec(-1.0f64..1.0, k * k),
            )
                .prop_map(move |(a, m)| {
                    let mut mix = Matrix::from_vec(k, k, m);
                    // Diagonal shift keeps the mixing matrix well conditioned.
                    for i in 0..k {
                        mix[(i, i)] += 3.0 * k as f64;
                    }
                    (Matrix::from_vec(s, k, a), mix)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn effective_dimension_axioms((phi, mix) in random_matrix()) {
            let a = custom(phi.clone());
            let d = effective_dimension(&a).unwrap();
            let s = phi.nrows() as f64;
            prop_assert!(a.rank() as f64 - 1e-6 <= d && d <= s + 1e-6);
            let b = custom(&phi * mix);
            prop_assert!((effective_dimension(&b).unwrap() - d).abs() <= 1e-6);
        }
    }
}
