use qnd_core::presets::toy_haroche;
use qnd_core::simulate::sample_counts_path;
use qnd_core::stats::total_variation;
use qnd_core::{counts, derive_seed, sample_mixture_trajectory, sample_trajectory, Trajectory};

#[test]
fn frequencies_converge_to_the_law() {
    let p = toy_haroche().unwrap();
    let law = p.family.probs(&p.theta_star, 5).unwrap();
    let path = sample_counts_path(&p.family, &p.theta_star, 5, &[1_000, 10_000, 100_000, 1_000_000], 8).unwrap();
    let tv: Vec<f64> = path.iter().map(|c| total_variation(&c.frequencies(), &law)).collect();
    assert!(tv[3] < 2e-3 && tv[3] < tv[0], "{tv:?}");
}

#[test]
fn prefixes_agree_with_full_record() {
    let p = toy_haroche().unwrap();
    let traj = sample_trajectory(&p.family, &p.theta_star, 2, 5_000, 17).unwrap();
    let path = sample_counts_path(&p.family, &p.theta_star, 2, &[10, 2_500, 5_000], 17).unwrap();
    for c in &path {
        assert_eq!(*c, counts(&traj, 8, c.n as usize).unwrap());
    }
}

#[test]
fn seeds_are_reproducible_and_distinct() {
    let p = toy_haroche().unwrap();
    let a = sample_mixture_trajectory(&p.family, &p.theta_star, &p.q, 300, 42).unwrap();
    let b = sample_mixture_trajectory(&p.family, &p.theta_star, &p.q, 300, 42).unwrap();
    let c = sample_mixture_trajectory(&p.family, &p.theta_star, &p.q, 300, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.outcomes, c.outcomes);
    assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    let back = Trajectory::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(a, back);
}

#[test]
fn realized_components_follow_the_weights() {
    let p = toy_haroche().unwrap();
    let mut freq = vec![0.0; 8];
    let runs = 20_000;
    for seed in 0..runs {
        freq[sample_mixture_trajectory(&p.family, &p.theta_star, &p.q, 1, seed).unwrap().gamma] += 1.0 / runs as f64;
    }
    assert!(total_variation(&freq, p.q.as_slice()) < 0.015);
}
