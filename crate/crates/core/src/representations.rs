//! Representation families built from an MDP.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::features::{Family, FeatureMatrix, Provenance};
use crate::linalg::{self, Matrix, SpectralDecomposition, Vector};
use crate::mdp::{self, SuccessorMatrix, TabularMdp};
use crate::rng;

/// Krylov vectors whose norm after orthogonalization falls to this level are
/// treated as already contained in the span.
const KRYLOV_SATURATION_TOL: f64 = 1e-10;

/// Successor representation and its SVD, computed once and shared across a
/// sweep over `k`.
#[derive(Debug, Clone)]
pub struct SrSpectrum {
    pub successor: SuccessorMatrix,
    pub decomposition: SpectralDecomposition,
    pub gamma: f64,
}

impl SrSpectrum {
    pub fn new(mdp: &TabularMdp) -> Result<Self> {
        let successor = mdp::successor_representation(mdp)?;
        let decomposition = linalg::svd(&successor.psi)?;
        Ok(Self {
            successor,
            decomposition,
            gamma: mdp.discount(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.decomposition.len()
    }

    /// `Phi_k = F_k`, the top-`k` left singular vectors.
    pub fn features(&self, k: usize) -> Result<FeatureMatrix> {
        check_k(k, self.num_states())?;
        FeatureMatrix::orthonormal(
            self.decomposition.top_left(k),
            Family::SrSvd,
            Provenance {
                gamma: Some(self.gamma),
                truncation: Some(k),
                ..Provenance::default()
            },
        )
    }
}

pub fn sr_svd_family(mdp: &TabularMdp, k: usize) -> Result<FeatureMatrix> {
    check_k(k, mdp.num_states())?;
    SrSpectrum::new(mdp)?.features(k)
}

fn check_k(k: usize, num_states: usize) -> Result<()> {
    if k == 0 || k > num_states {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={num_states}"
        )));
    }
    Ok(())
}

/// Orthonormal basis of `span{r, P r, ..., P^{k-1} r}` by Arnoldi iteration with
/// modified Gram-Schmidt and one reorthogonalization pass. Stops early (and
/// records it in the provenance) once the space stops growing.
pub fn krylov_basis(mdp: &TabularMdp, k: usize) -> Result<FeatureMatrix> {
    let s = mdp.num_states();
    check_k(k, s)?;
    let r = mdp.reward();
    let r_norm = r.norm();
    if r_norm == 0.0 {
        return Err(Error::Config("Krylov basis needs a nonzero reward".into()));
    }
    let p = mdp.transition();
    let mut columns: Vec<Vector> = vec![r / r_norm];
    while columns.len() < k {
        let mut w = p * columns.last().expect("nonempty");
        for _ in 0..2 {
            for q in &columns {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= KRYLOV_SATURATION_TOL {
            break;
        }
        columns.push(w / norm);
    }
    let saturated = (columns.len() < k).then_some(columns.len());
    FeatureMatrix::orthonormal(
        Matrix::from_columns(&columns),
        Family::Krylov,
        Provenance {
            gamma: Some(mdp.discount()),
            truncation: Some(k),
            saturated_at: saturated,
            ..Provenance::default()
        },
    )
}

/// iid standard normal `S x k` draws, orthonormalized by QR.
pub fn random_features(num_states: usize, k: usize, seed: u64) -> Result<FeatureMatrix> {
    check_k(k, num_states)?;
    let mut rng = rng::stream(seed);
    let raw = Matrix::from_fn(num_states, k, |_, _| StandardNormal.sample(&mut rng));
    let q = raw.qr().q();
    FeatureMatrix::orthonormal(
        q,
        Family::Random,
        Provenance {
            seed: Some(seed),
            truncation: Some(k),
            ..Provenance::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph_mdp, GraphKind, GraphSpec, RewardSpec};
    use crate::linalg::{orthonormality_error, OrthonormalBasis};

    fn graph_mdp(kind: GraphKind, s: usize, gamma: f64, reward: RewardSpec) -> TabularMdp {
        build_graph_mdp(&GraphSpec::new(kind, s, gamma), &reward).unwrap()
    }

    #[test]
    fn full_sr_basis_spans_everything() {
        let mdp = graph_mdp(GraphKind::Chain, 12, 0.9, RewardSpec::gaussian(1));
        let fm = sr_svd_family(&mdp, 12).unwrap();
        let v = mdp::value_function(&mdp).unwrap().values;
        assert!(fm.basis().residual(&v).amax() < 1e-10);
    }

    #[test]
    fn disconnected_sr_features_are_coordinate_vectors() {
        let mdp = graph_mdp(GraphKind::Disconnected, 10, 0.99, RewardSpec::all_ones());
        for k in [1, 3, 7] {
            let fm = sr_svd_family(&mdp, k).unwrap();
            let p = fm.basis().projector();
            // A coordinate projector is diagonal with 0/1 entries summing to k.
            let mut ones = 0;
            for i in 0..10 {
                for j in 0..10 {
                    let x = p[(i, j)];
                    if i == j {
                        assert!(x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12);
                        if (x - 1.0).abs() < 1e-12 {
                            ones += 1;
                        }
                    } else {
                        assert!(x.abs() < 1e-12);
                    }
                }
            }
            assert_eq!(ones, k);
        }
    }

    #[test]
    fn torus_top_feature_is_constant() {
        let mdp = graph_mdp(GraphKind::Torus1d, 400, 0.99, RewardSpec::all_ones());
        let fm = sr_svd_family(&mdp, 1).unwrap();
        let c = 1.0 / 20.0;
        assert!(fm.phi().iter().all(|x| (x - c).abs() < 1e-6));
    }

    #[test]
    fn sr_family_is_nested_across_spectral_gaps() {
        let mdp = graph_mdp(GraphKind::Chain, 15, 0.9, RewardSpec::gaussian(2));
        let spec = SrSpectrum::new(&mdp).unwrap();
        let sigma = &spec.decomposition.singular_values;
        for k in 1..15 {
            if sigma[k - 1] - sigma[k] > 1e-8 {
                let small = spec.features(k).unwrap();
                let big = spec.features(k + 1).unwrap();
                for j in 0..k {
                    let col = small.phi().column(j).into_owned();
                    assert!(big.basis().residual(&col).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn krylov_examples() {
        let mdp = graph_mdp(GraphKind::Chain, 8, 0.9, RewardSpec::gaussian(3));
        let k1 = krylov_basis(&mdp, 1).unwrap();
        let r = mdp.reward();
        assert!((k1.phi().column(0) - r / r.norm()).amax() < 1e-15);

        let idle = graph_mdp(GraphKind::Disconnected, 6, 0.9, RewardSpec::gaussian(4));
        let kr = krylov_basis(&idle, 4).unwrap();
        assert_eq!(kr.k(), 1);
        assert_eq!(kr.provenance().saturated_at, Some(1));

        let zero = idle.with_reward(Vector::zeros(6), 1.0).unwrap();
        assert!(matches!(krylov_basis(&zero, 2), Err(Error::Config(_))));
    }

    #[test]
    fn maximal_krylov_space_contains_value() {
        let mdp = graph_mdp(GraphKind::Chain, 10, 0.95, RewardSpec::gaussian(5));
        let kr = krylov_basis(&mdp, 10).unwrap();
        assert!(orthonormality_error(kr.phi()) < 1e-9);
        let v = mdp::value_function(&mdp).unwrap().values;
        assert!(kr.basis().residual(&v).norm() <= 1e-8);
    }

    #[test]
    fn random_features_are_seeded_and_orthonormal() {
        let a = random_features(400, 20, 3).unwrap();
        let b = random_features(400, 20, 3).unwrap();
        assert_eq!(a.phi(), b.phi());
        assert!(orthonormality_error(a.phi()) < 1e-9);
        assert_ne!(a.phi(), random_features(400, 20, 4).unwrap().phi());

        let full = random_features(9, 9, 1).unwrap();
        assert_eq!(full.rank(), 9);
        let x = Vector::from_fn(9, |i, _| i as f64);
        let basis: &OrthonormalBasis = full.basis();
        assert!(basis.residual(&x).amax() < 1e-12);
    }

    #[test]
    fn k_outside_range_is_rejected() {
        let mdp = graph_mdp(GraphKind::Chain, 5, 0.9, RewardSpec::all_ones());
        assert!(sr_svd_family(&mdp, 0).is_err());
        assert!(sr_svd_family(&mdp, 6).is_err());
        assert!(random_features(5, 6, 0).is_err());
    }
}
