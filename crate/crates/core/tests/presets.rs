use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

use qnd_core::check_identifiability;
use qnd_core::presets::{
    qubit_rotation, qubit_rotation_search_box, qubit_rotation_with, toy_haroche, toy_haroche_family,
};

#[test]
fn toy_laws_coincide_on_the_full_domain() {
    // 4·π/4 and 3·π/3 are the same phase
    let fam = toy_haroche_family().unwrap();
    let a = fam.probs(&[FRAC_PI_4], 3).unwrap();
    let b = fam.probs(&[FRAC_PI_3], 2).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
    let grid = vec![vec![FRAC_PI_4], vec![FRAC_PI_3]];
    let rep = check_identifiability(&fam, &grid, 1e-9).unwrap();
    assert!(!rep.passed());
    assert!(rep.flagged.iter().any(|f| (f.alpha, f.beta) == (3, 2) || (f.alpha, f.beta) == (2, 3)));
}

#[test]
fn toy_window_is_identifiable() {
    let p = toy_haroche().unwrap();
    assert!((p.search_box.width(0) - PI / 32.0).abs() < 1e-15);
    let rep = check_identifiability(&p.family, &p.search_box.linspace(65), 1e-4).unwrap();
    assert!(rep.passed(), "{:?}", rep.flagged.first());
}

#[test]
fn qubit_full_domain_is_not_identifiable() {
    let p = qubit_rotation().unwrap();
    let a = p.family.probs(&[0.8], 0).unwrap();
    let b = p.family.probs(&[0.4], 1).unwrap();
    assert!((a[0] - b[0]).abs() < 1e-15);
}

#[test]
fn qubit_search_boxes_are_identifiable() {
    for d in 1..=5 {
        let p = qubit_rotation_with(d).unwrap();
        assert_eq!(p.search_box, qubit_rotation_search_box(d).unwrap());
        assert!(p.family.domain().contains_box(&p.search_box));
        assert!(p.search_box.contains_interior(&p.theta_star));
        let rep = check_identifiability(&p.family, &p.search_box.linspace(97), 1e-4).unwrap();
        assert!(rep.passed(), "d = {d}: {:?}", rep.flagged.first());
    }
    assert_eq!(qubit_rotation().unwrap().theta_star, vec![0.75]);
}
