//! Bisimulation metric and the representation derived from it.

use crate::error::{Error, Result};
use crate::features::{Family, FeatureMatrix, Provenance};
use crate::graph::Graph;
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::{validate_stochastic, TabularMdp};
use crate::transport::wasserstein1;

/// Per-action dynamics `P^a` (stored sparsely) and rewards `R^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMdp {
    num_states: usize,
    rows: Vec<Vec<Vec<(usize, f64)>>>,
    rewards: Vec<Vector>,
}

impl ActionMdp {
    pub fn new(transitions: &[Matrix], rewards: Vec<Vector>) -> Result<Self> {
        if transitions.is_empty() || transitions.len() != rewards.len() {
            return Err(Error::InvalidArgument(format!(
                "need one reward per action, got {} transitions and {} rewards",
                transitions.len(),
                rewards.len()
            )));
        }
        let s = transitions[0].nrows();
        for (p, r) in transitions.iter().zip(&rewards) {
            if p.shape() != (s, s) || r.len() != s {
                return Err(Error::InvalidArgument("per-action shapes disagree".into()));
            }
            validate_stochastic(p)?;
        }
        let rows = transitions
            .iter()
            .map(|p| {
                p.row_iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, w)| **w > 0.0)
                            .map(|(j, w)| (j, *w))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            num_states: s,
            rows,
            rewards,
        })
    }

    /// Deterministic moves up/down/left/right on a grid layout, with
    /// `R_s^a = r(s)`.
    pub fn from_compass(graph: &Graph, reward: &Vector) -> Result<Self> {
        let compass = graph
            .compass()
            .ok_or_else(|| Error::Config("graph has no compass actions".into()))?;
        let s = graph.num_states();
        if reward.len() != s {
            return Err(Error::InvalidArgument("reward length mismatch".into()));
        }
        let rows = (0..4)
            .map(|a| compass.iter().map(|next| vec![(next[a], 1.0)]).collect())
            .collect();
        Ok(Self {
            num_states: s,
            rows,
            rewards: vec![reward.clone(); 4],
        })
    }

    /// Single action given by the policy-marginalized dynamics.
    pub fn from_policy(mdp: &TabularMdp) -> Result<Self> {
        Self::new(std::slice::from_ref(mdp.transition()), vec![mdp.reward().clone()])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisimulationParams {
    pub c_r: f64,
    pub c_t: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl BisimulationParams {
    /// `c_r = 1`, `c_t = gamma`.
    pub fn for_discount(gamma: f64) -> Self {
        Self {
            c_r: 1.0,
            c_t: gamma,
            max_iter: 20_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisimulationMetric {
    pub distances: Matrix,
    pub iterations_run: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm change of every sweep, in order.
    pub residual_history: Vec<f64>,
}

/// Jacobi iteration of
/// `d(s, t) <- max_a c_r |R_s^a - R_t^a| + c_t W1_d(P_s^a, P_t^a)` from `d = 0`.
/// Non-convergence is reported through `converged`, not as an error.
pub fn bisimulation_metric(mdp: &ActionMdp, params: &BisimulationParams) -> Result<BisimulationMetric> {
    let BisimulationParams { c_r, c_t, max_iter, tol } = *params;
    if !(c_r > 0.0 && c_r.is_finite()) {
        return Err(Error::InvalidArgument(format!("c_r must be positive, got {c_r}")));
    }
    if !(c_t > 0.0 && c_t < 1.0) {
        return Err(Error::InvalidArgument(format!("c_t must lie in (0, 1), got {c_t}")));
    }
    let s = mdp.num_states;
    let mut d = Matrix::zeros(s, s);
    let mut next = Matrix::zeros(s, s);
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut change: f64 = 0.0;
        for i in 0..s {
            for j in (i + 1)..s {
                let mut best: f64 = 0.0;
                for (rows, r) in mdp.rows.iter().zip(&mdp.rewards) {
                    let w = wasserstein1(&rows[i], &rows[j], &d);
                    best = best.max(c_r * (r[i] - r[j]).abs() + c_t * w);
                }
                change = change.max((best - d[(i, j)]).abs());
                next[(i, j)] = best;
                next[(j, i)] = best;
            }
        }
        std::mem::swap(&mut d, &mut next);
        iterations += 1;
        residual = change;
        history.push(change);
        if change <= tol {
            break;
        }
    }
    Ok(BisimulationMetric {
        distances: d,
        iterations_run: iterations,
        residual,
        converged: residual <= tol,
        residual_history: history,
    })
}

/// Top-`k` left singular vectors of the distance matrix. An all-zero metric
/// yields the single constant column.
pub fn bisimulation_representation(metric: &BisimulationMetric, k: usize) -> Result<FeatureMatrix> {
    let s = metric.distances.nrows();
    if k == 0 || k > s {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={s}")));
    }
    let provenance = Provenance {
        truncation: Some(k),
        ..Provenance::default()
    };
    if metric.distances.amax() == 0.0 {
        let constant = Matrix::from_element(s, 1, 1.0 / (s as f64).sqrt());
        return FeatureMatrix::orthonormal(
            constant,
            Family::Bisimulation,
            Provenance {
                note: Some("all states bisimilar".into()),
                ..provenance
            },
        );
    }
    let decomposition = linalg::svd(&metric.distances)?;
    FeatureMatrix::orthonormal(decomposition.top_left(k), Family::Bisimulation, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, generate_reward, GraphKind, GraphSpec, RewardSpec, FOUR_ROOM_CELLS};
    use crate::linalg::orthonormality_error;

    fn absorbing(rewards: &[f64]) -> ActionMdp {
        let n = rewards.len();
        ActionMdp::new(&[Matrix::identity(n, n)], vec![Vector::from_row_slice(rewards)]).unwrap()
    }

    fn four_room_metric() -> (BisimulationMetric, BisimulationParams) {
        let spec = GraphSpec::new(GraphKind::FourRoom, FOUR_ROOM_CELLS, 0.9);
        let graph = build_graph(&spec).unwrap();
        let r = generate_reward(&RewardSpec::gaussian(11), FOUR_ROOM_CELLS).unwrap();
        let mdp = ActionMdp::from_compass(&graph, &r).unwrap();
        let params = BisimulationParams {
            tol: 1e-8,
            ..BisimulationParams::for_discount(0.9)
        };
        (bisimulation_metric(&mdp, &params).unwrap(), params)
    }

    #[test]
    fn bisimilar_states_are_at_distance_zero() {
        let p = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let mdp = ActionMdp::new(&[p], vec![Vector::from_row_slice(&[0.3, 0.3, 1.0])]).unwrap();
        let m = bisimulation_metric(&mdp, &BisimulationParams::for_discount(0.9)).unwrap();
        assert!(m.converged);
        assert_eq!(m.distances[(0, 1)], 0.0);
        assert!(m.distances[(0, 2)] > 0.0);
    }

    #[test]
    fn absorbing_pair_fixed_point() {
        let (r1, r2, c_r, c_t) = (0.2, 0.9, 1.5, 0.8);
        let params = BisimulationParams {
            c_r,
            c_t,
            max_iter: 10_000,
            tol: 1e-13,
        };
        let m = bisimulation_metric(&absorbing(&[r1, r2]), &params).unwrap();
        let expected = c_r * (r1 - r2).abs() / (1.0 - c_t);
        assert!((m.distances[(0, 1)] - expected).abs() < 1e-11);
    }

    #[test]
    fn four_room_metric_is_a_pseudometric() {
        let (m, params) = four_room_metric();
        assert!(m.converged);
        let d = &m.distances;
        assert!(linalg::asymmetry(d) <= 1e-10);
        assert!(d.diagonal().iter().all(|&x| x == 0.0));
        assert!(d.iter().all(|&x| x >= 0.0));
        let s = d.nrows();
        for i in (0..s).step_by(3) {
            for j in (0..s).step_by(5) {
                for l in (0..s).step_by(7) {
                    assert!(d[(i, l)] <= d[(i, j)] + d[(j, l)] + 1e-8);
                }
            }
        }
        // Monotone contraction from zero.
        for pair in m.residual_history.windows(2) {
            if pair[0] > 1e-12 {
                assert!(pair[1] / pair[0] <= params.c_t + 0.05);
            }
        }
    }

    #[test]
    fn representation_examples() {
        let (m, _) = four_room_metric();
        let fm = bisimulation_representation(&m, 4).unwrap();
        assert_eq!(fm.phi().shape(), (FOUR_ROOM_CELLS, 4));
        assert!(orthonormality_error(fm.phi()) < 1e-9);

        let zero = bisimulation_metric(&absorbing(&[0.5; 6]), &BisimulationParams::for_discount(0.9)).unwrap();
        assert_eq!(zero.distances.amax(), 0.0);
        let fm = bisimulation_representation(&zero, 3).unwrap();
        assert_eq!(fm.k(), 1);
        assert!(fm.phi().iter().all(|&x| (x - 1.0 / 6f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn full_representation_spans_everything() {
        let m = bisimulation_metric(&absorbing(&[0.1, 0.5, 0.2, 0.9]), &BisimulationParams::for_discount(0.5))
            .unwrap();
        let fm = bisimulation_representation(&m, 4).unwrap();
        let v = Vector::from_row_slice(&[3.0, -1.0, 2.0, 0.5]);
        assert!(fm.basis().residual(&v).amax() < 1e-10);
    }

    #[test]
    fn parameters_are_validated() {
        let mdp = absorbing(&[0.0, 1.0]);
        let mut params = BisimulationParams::for_discount(0.9);
        params.c_t = 1.0;
        assert!(bisimulation_metric(&mdp, &params).is_err());
        params.c_t = 0.5;
        params.c_r = 0.0;
        assert!(bisimulation_metric(&mdp, &params).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let params = BisimulationParams {
            max_iter: 3,
            ..BisimulationParams::for_discount(0.99)
        };
        let m = bisimulation_metric(&absorbing(&[0.0, 1.0]), &params).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations_run, 3);
    }
}
