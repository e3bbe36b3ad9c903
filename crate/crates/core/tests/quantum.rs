mod common;

use std::sync::Arc;

use proptest::prelude::*;
use qnd_core::linalg::{expm_neg_i, hermitian_eigen, ComplexMatrix, C64};
use qnd_core::presets::{qubit_rotation, qubit_rotation_system};
use qnd_core::quantum::{filter_trajectory, FilterModel, LinearHamiltonians, QndSystem};
use qnd_core::simulate::sample_trajectory;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_hermitian, random_qnd};

#[test]
fn rotation_law_and_fisher() {
    let sys = qubit_rotation_system(2).unwrap();
    for &theta in &[0.3, 0.55, 0.75, 1.0, 1.2] {
        for alpha in 0..2 {
            let n = (alpha + 1) as f64;
            let p = sys.outcome_probs(&[theta], alpha).unwrap();
            assert!((p[0] - (n * theta / 2.0).cos().powi(2)).abs() < 1e-14);
            let fisher = sys.fisher_formula(&[theta], alpha).unwrap();
            assert!((fisher[0] - n * n).abs() < 1e-10, "{fisher:?}");
        }
    }
}

#[test]
fn score_formula_matches_exact_derivative_for_scalar_generators() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let gens = (0..3).map(|_| random_hermitian(3, 1.0, &mut rng)).collect();
        let probe = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.64), C64::new(0.48, 0.0)];
        let sys = QndSystem::new(3, Arc::new(LinearHamiltonians::scalar(gens).unwrap()), probe).unwrap();
        for &theta in &[0.2, 0.7] {
            for alpha in 0..3 {
                let p = sys.outcome_probs(&[theta], alpha).unwrap();
                let g = sys.prob_grads(&[theta], alpha).unwrap().unwrap();
                let s = sys.score_formula(&[theta], alpha).unwrap();
                for j in 0..3 {
                    assert!((g[j] / p[j] - s[j]).abs() < 1e-9 * (1.0 + s[j].abs()));
                }
            }
        }
    }
}

#[test]
fn random_systems_have_unitary_propagators_and_exact_gradients() {
    for seed in 0..30 {
        let (sys, fam) = random_qnd(seed);
        for theta in fam.domain().validation_points().iter().step_by(7) {
            for alpha in 0..fam.n_components() {
                assert!(sys.unitary(theta, alpha).unwrap().unitarity_defect() < 1e-10);
                let s: f64 = sys.outcome_probs(theta, alpha).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        let disc = fam.gradient_discrepancy(&fam.domain().validation_points()).unwrap().unwrap();
        assert!(disc < 1e-6, "seed {seed}: {disc}");
    }
}

#[test]
fn state_filter_agrees_with_classical_filter() {
    let p = qubit_rotation().unwrap();
    let sys = p.system.as_ref().unwrap();
    let traj = sample_trajectory(&p.family, &[0.75], 1, 300, 9).unwrap();
    let quantum = FilterModel::Quantum(sys);
    let classical = FilterModel::Family(&p.family);
    let q0 = quantum.filter(&[0.75]).unwrap().initial(&[0.5, 0.5]).unwrap();
    let c0 = classical.filter(&[0.75]).unwrap().initial(&[0.5, 0.5]).unwrap();
    let q_path = filter_trajectory(quantum, q0, &[0.75], &traj.outcomes).unwrap();
    let c_path = filter_trajectory(classical, c0, &[0.75], &traj.outcomes).unwrap();
    for (a, b) in q_path.iter().zip(&c_path) {
        for k in 0..2 {
            assert!((a.q[k] - b.q[k]).abs() < 1e-12);
        }
        assert!(a.representation_gap() < 1e-12);
    }
    assert!(q_path.last().unwrap().q[1] > 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_is_unitary_and_inverts(seed in 0u64..10_000, n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, 3.0, &mut rng);
        let u = expm_neg_i(&h).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-10);
        let back = expm_neg_i(&h.scale(C64::new(-1.0, 0.0))).unwrap();
        prop_assert!(u.matmul(&back).max_abs_diff(&ComplexMatrix::identity(n)) < 1e-10);
        let eig = hermitian_eigen(&h).unwrap();
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }
}
