use repgen_core::container::{read_binary, read_csv, write_binary, write_csv};
use repgen_core::graph::{build_graph_mdp, generate_reward};
use repgen_core::linalg::Matrix;
use repgen_core::mdp::{return_statistics, successor_representation, value_function};
use repgen_core::monte_carlo::{default_horizon, run_trials, sample_dataset};
use repgen_core::representations::{krylov_basis, random_features, SrSpectrum};
use repgen_core::risk::{
    approximation_error, effective_dimension, one_hot_approx_bound, one_hot_approx_exact, theorem1_bound,
    theorem_a2_bound,
};
use repgen_core::{Family, GraphKind, GraphSpec, RewardSpec, SamplingDistribution, TrialPlan};

fn mdp(kind: GraphKind, s: usize, gamma: f64, reward: RewardSpec) -> repgen_core::TabularMdp {
    build_graph_mdp(&GraphSpec::new(kind, s, gamma), &reward).unwrap()
}

#[test]
fn value_is_successor_times_reward_on_every_graph() {
    for (kind, s) in [
        (GraphKind::Star, 20),
        (GraphKind::Chain, 20),
        (GraphKind::Torus1d, 20),
        (GraphKind::Disconnected, 20),
        (GraphKind::FullyConnected, 20),
        (GraphKind::OpenRoom, 25),
        (GraphKind::Torus2d, 25),
        (GraphKind::FourRoom, 104),
    ] {
        let m = mdp(kind, s, 0.95, RewardSpec::gaussian(1));
        let psi = successor_representation(&m).unwrap().psi;
        let v = value_function(&m).unwrap().values;
        assert!((&psi * m.reward() - &v).amax() <= 1e-9, "{kind}");
        let v_max = return_statistics(&m).v_max;
        assert!(v.amax() <= v_max + 1e-9);
        let sr = SrSpectrum::new(&m).unwrap();
        assert!((sr.decomposition.reconstruct() - &psi).amax() <= 1e-9 * psi.amax());
    }
}

#[test]
fn full_krylov_space_contains_the_value() {
    let m = mdp(GraphKind::Torus2d, 49, 0.9, RewardSpec::gaussian(5));
    let v = value_function(&m).unwrap().values;
    let phi = krylov_basis(&m, 49).unwrap();
    assert!(approximation_error(&phi, &v).unwrap() <= 1e-8);
    // The space saturates early because the torus spectrum is highly tied.
    assert!(phi.k() < 49);
}

#[test]
fn disconnected_features_and_one_hot_structure() {
    let m = mdp(GraphKind::Disconnected, 12, 0.9, RewardSpec::all_ones());
    let sr = SrSpectrum::new(&m).unwrap();
    for k in [1, 5, 11] {
        let phi = sr.features(k).unwrap();
        let projector = phi.basis().projector();
        let diag = projector.diagonal();
        assert!(diag.iter().all(|&d| d.abs() < 1e-12 || (d - 1.0).abs() < 1e-12));
        assert!((projector.sum() - k as f64).abs() < 1e-9);
        for i in 0..12 {
            let r = generate_reward(&RewardSpec::one_hot(i), 12).unwrap();
            let v = value_function(&m.with_reward(r, 1.0).unwrap()).unwrap().values;
            let measured = approximation_error(&phi, &v).unwrap();
            let exact = one_hot_approx_exact(&sr.decomposition, k, i, 1.0).unwrap();
            let bound = one_hot_approx_bound(&sr.decomposition, k, i, 1.0).unwrap();
            assert!((measured - exact).abs() <= 1e-9);
            if diag[i] < 0.5 {
                // Outside the retained coordinates the value is a single
                // spike of height 1/(1-gamma).
                assert!((measured - 100.0 / 12.0).abs() <= 1e-9);
                assert!(measured <= bound + 1e-9);
            } else {
                assert!(measured <= 1e-18);
            }
        }
    }
}

#[test]
fn containers_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let phi = random_features(30, 6, 9).unwrap();
    let bin = dir.path().join("phi.bin");
    write_binary(&phi, std::fs::File::create(&bin).unwrap()).unwrap();
    let back = read_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(back.phi(), phi.phi());
    assert_eq!(back.family(), Family::Random);

    let csv = dir.path().join("phi.csv");
    write_csv(&phi, std::fs::File::create(&csv).unwrap()).unwrap();
    let back = read_csv(std::fs::File::open(&csv).unwrap(), Family::Custom).unwrap();
    assert_eq!(back.phi(), phi.phi());
    let (a, b) = (effective_dimension(&back).unwrap(), effective_dimension(&phi).unwrap());
    assert!((a - b).abs() <= 1e-12 * b);
}

#[test]
fn general_sampling_bound_reduces_to_uniform_bound() {
    let m = mdp(GraphKind::OpenRoom, 36, 0.9, RewardSpec::gaussian(2));
    let v = value_function(&m).unwrap().values;
    let phi = SrSpectrum::new(&m).unwrap().features(6).unwrap();
    let uniform = SamplingDistribution::uniform(36);
    let a = theorem1_bound(&phi, &v, 500, 0.05, 1.0).unwrap();
    let b = theorem_a2_bound(&phi, &v, 500, 0.05, 1.0, &uniform).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-300);
    assert!(rel(a.total, b.total) < 1e-9);
    assert!(rel(a.n_min, b.n_min) < 1e-9);
    assert_eq!(a.valid, b.valid);

    let huge = theorem1_bound(&phi, &v, 1 << 40, 0.05, 1.0).unwrap();
    assert!((huge.total - huge.approx_error).abs() <= 1e-6 * huge.approx_error.max(1e-12));
}

#[test]
fn many_samples_approach_the_approximation_error() {
    let s = 50;
    let m = mdp(GraphKind::Torus1d, s, 0.9, RewardSpec::gaussian(4));
    let v = value_function(&m).unwrap().values;
    let sr = SrSpectrum::new(&m).unwrap();
    let nu = SamplingDistribution::uniform(s);
    let plan = TrialPlan {
        n: 10 * s,
        trials: 10,
        base_seed: 5,
        horizon: default_horizon(&m),
    };
    for k in [8, 12, 16] {
        let phi = sr.features(k).unwrap();
        let approx = approximation_error(&phi, &v).unwrap();
        let est = run_trials(&m, &phi, &nu, &plan).unwrap();
        assert!(est.median >= approx - 1e-12);
        assert!(est.median <= 2.0 * approx, "k = {k}: {} vs {approx}", est.median);
    }
}

#[test]
fn rollouts_on_self_loops_are_deterministic() {
    let m = mdp(GraphKind::Disconnected, 4, 0.99, RewardSpec::all_ones());
    let horizon = 2750;
    assert!(0.99f64.powi(horizon as i32) * 100.0 <= 1e-6);
    let data = sample_dataset(&m, &SamplingDistribution::uniform(4), 50, horizon, 7).unwrap();
    let expected = (1.0 - 0.99f64.powi(horizon as i32)) / 0.01;
    assert!(data.returns.iter().all(|&y| (y - expected).abs() < 1e-9));
    let identity = Matrix::identity(4, 4);
    assert_eq!(m.transition(), &identity);
}
