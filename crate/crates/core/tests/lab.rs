mod common;

use std::sync::Arc;

use qnd_core::estimate::log_sum_exp;
use qnd_core::lab::{
    consistency_experiment, cramer_rao_experiment, log_likelihood_ratio, mixture_collapse_experiment,
    purification_experiment, ExperimentPlan,
};
use qnd_core::presets::qubit_rotation;
use qnd_core::{
    Alphabet, ClosureModel, ComponentSet, CountVector, MixtureWeights, ParameterBox, ParametricFamily, Regularity,
};

use common::{binary_sequences, tiny_instance, tiny_prob};

/// `p(1) = θ` with a single component.
fn bernoulli() -> ParametricFamily {
    let model = ClosureModel::new(2, 1, |t, _, j| if j == 1 { t[0] } else { 1.0 - t[0] })
        .with_grad(|_, _, j, out| out[0] = if j == 1 { 1.0 } else { -1.0 });
    ParametricFamily::new(
        "bernoulli",
        Alphabet::indexed(2).unwrap(),
        ComponentSet::indexed(1).unwrap(),
        ParameterBox::interval(0.05, 0.95).unwrap(),
        Regularity::C3,
        Arc::new(model),
    )
    .unwrap()
}

fn bernoulli_plan(n_grid: Vec<usize>, reps: usize) -> ExperimentPlan {
    ExperimentPlan {
        theta_star: vec![0.3],
        q: MixtureWeights::uniform(1).unwrap(),
        h: vec![0.0],
        n_grid,
        n_reps: reps,
        master_seed: 11,
        search_box: ParameterBox::interval(0.05, 0.95).unwrap(),
        workers: None,
    }
}

#[test]
fn likelihood_ratio_is_a_change_of_measure() {
    let (_, fam) = tiny_instance();
    let q = MixtureWeights::new(vec![0.4, 0.6]).unwrap();
    let (a, b) = (0.5, 0.8);
    let log_p = |seq: &[usize], t: f64| {
        let terms: Vec<f64> =
            (0..2).map(|g| q.get(g).ln() + seq.iter().map(|&j| tiny_prob(t, g, j).ln()).sum::<f64>()).collect();
        log_sum_exp(&terms)
    };
    let seqs = binary_sequences(8);
    let mut total = 0.0;
    for seq in &seqs {
        let c = CountVector::from_outcomes(2, seq).unwrap();
        let lr = log_likelihood_ratio(&fam, &q, &c, &[a], &[b]).unwrap();
        assert!((lr - (log_p(seq, a) - log_p(seq, b))).abs() < 1e-10);
        total += (log_p(seq, b) + lr).exp();
    }
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}

#[test]
fn bernoulli_estimator_attains_the_bound() {
    let fam = bernoulli();
    let rep = cramer_rao_experiment(&fam, &bernoulli_plan(vec![500, 2000], 2000)).unwrap();
    assert!(rep.passed, "{:?}", rep.cells);
    for c in &rep.cells {
        assert!((c.target[0] - 0.21).abs() < 1e-6);
        assert!((c.ratio - 1.0).abs() < 0.1, "{c:?}");
        assert_eq!(c.fraction_at_boundary, 0.0);
    }
}

#[test]
fn bernoulli_estimator_is_consistent() {
    let fam = bernoulli();
    let rep = consistency_experiment(&fam, &bernoulli_plan(vec![100, 1000, 10_000], 200)).unwrap();
    assert!(rep.passed && rep.errors_decreasing);
    let errs: Vec<f64> = rep.cells.iter().map(|c| c.median_error).collect();
    // median |θ̂ − θ*| ≈ 0.674 √(θ(1−θ)/n)
    let want = 0.674 * (0.21f64 / 10_000.0).sqrt();
    assert!((errs[2] / want - 1.0).abs() < 0.25, "{errs:?}");
}

#[test]
fn single_component_never_needs_to_collapse() {
    let fam = bernoulli();
    let rep = mixture_collapse_experiment(&fam, &bernoulli_plan(vec![100, 200], 20)).unwrap();
    assert!(rep.passed);
    let c = &rep.components[0];
    assert!(c.fitted_rate.is_none() && c.min_kl.is_none());
    assert!(c.cells.iter().all(|x| x.fraction_collapsed == 1.0 && x.median_log10_sqrt_n_r.is_none()));
}

#[test]
fn single_component_posterior_is_pure_from_the_start() {
    let fam = bernoulli();
    let rep = purification_experiment(&fam, None, &bernoulli_plan(vec![1, 10], 30)).unwrap();
    assert!(rep.passed && !rep.tracks_state);
    assert!(rep.cells.iter().all(|c| c.fraction_pure == 1.0 && c.median_weight == 1.0));
    assert_eq!(rep.map_accuracy, 1.0);
}

#[test]
fn qubit_efficiency_holds_off_the_centre() {
    let p = qubit_rotation().unwrap();
    let mut plan = ExperimentPlan::from_preset(&p, 4);
    plan.h = vec![0.5];
    plan.n_grid = vec![2000];
    plan.n_reps = 1500;
    let rep = cramer_rao_experiment(&p.family, &plan).unwrap();
    assert!(rep.passed, "{:?}", rep.cells);
    for c in &rep.cells {
        let n = (c.gamma + 1) as f64;
        assert!((c.target[0] - 1.0 / (n * n)).abs() < 1e-8);
    }
}

#[test]
fn qubit_state_purifies_with_prior_frequencies() {
    let p = qubit_rotation().unwrap();
    let mut plan = ExperimentPlan::from_preset(&p, 5);
    plan.h = vec![0.0];
    plan.n_grid = vec![50, 200];
    plan.n_reps = 1000;
    let rep = purification_experiment(&p.family, p.system.as_ref(), &plan).unwrap();
    assert!(rep.passed && rep.tracks_state, "{rep:?}");
    assert!(rep.cells[1].fraction_pure >= rep.cells[0].fraction_pure);
}
