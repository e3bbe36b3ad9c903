mod common;

use proptest::prelude::*;
use qnd_core::family::relative_discrepancy;
use qnd_core::MixtureWeights;

use common::{random_qnd, softmax_family};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laws_are_normalized(seed in 0u64..5_000, u in 0.0f64..1.0) {
        let fam = softmax_family(seed);
        let theta = fam.domain().from_unit(&vec![u; fam.dim()]);
        for alpha in 0..fam.n_components() {
            let p = fam.probs(&theta, alpha).unwrap();
            prop_assert!(p.iter().all(|x| *x > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in 0u64..5_000) {
        let fam = softmax_family(seed);
        for theta in fam.domain().validation_points().iter().step_by(5) {
            for alpha in 0..fam.n_components() {
                let (g, _) = fam.prob_grads(theta, alpha).unwrap();
                let fd = fam.fd_prob_grads(theta, alpha);
                prop_assert!(relative_discrepancy(&g, &fd) < 1e-6);
            }
        }
    }

    #[test]
    fn unnormalized_weights_normalize(w in prop::collection::vec(0.01f64..10.0, 1..9)) {
        let q = MixtureWeights::from_unnormalized(&w).unwrap();
        let s: f64 = w.iter().sum();
        prop_assert!((q.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, x) in w.iter().enumerate() {
            prop_assert!((q.get(a) - x / s).abs() < 1e-12);
        }
    }
}

#[test]
fn invalid_weights_are_rejected() {
    assert!(MixtureWeights::new(vec![]).is_err());
    assert!(MixtureWeights::new(vec![0.5, 0.6]).is_err());
    assert!(MixtureWeights::new(vec![1.0, 0.0]).is_err());
    assert!(MixtureWeights::new(vec![f64::NAN, 1.0]).is_err());
    assert!(MixtureWeights::from_unnormalized(&[0.0, 0.0]).is_err());
    assert!(MixtureWeights::poisson_like(-1.0, &[1, 2]).is_err());
}

#[test]
fn family_rejects_out_of_domain_arguments() {
    let (_, fam) = random_qnd(3);
    let outside = vec![5.0; fam.dim()];
    assert!(fam.probs(&outside, 0).is_err());
    assert!(fam.probs(&fam.domain().center(), fam.n_components()).is_err());
}
