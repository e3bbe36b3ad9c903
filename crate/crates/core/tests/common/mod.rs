#![allow(dead_code)]

use std::sync::Arc;

use qnd_core::family::{Alphabet, ComponentSet, ParameterBox, ParametricFamily, ProbabilityModel, Regularity};
use qnd_core::linalg::{ComplexMatrix, C64};
use qnd_core::quantum::{LinearHamiltonians, QndSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `p(j|α) ∝ exp(c_{αj} + Σ_k a_{αjk} sin(θ_k + b_{αjk}))`.
pub struct Softmax {
    l: usize,
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Softmax {
    fn idx(&self, alpha: usize, j: usize, k: usize) -> usize {
        (alpha * self.l + j) * self.dim + k
    }

    fn logits(&self, theta: &[f64], alpha: usize) -> Vec<f64> {
        (0..self.l)
            .map(|j| {
                self.c[alpha * self.l + j]
                    + (0..self.dim)
                        .map(|k| self.a[self.idx(alpha, j, k)] * (theta[k] + self.b[self.idx(alpha, j, k)]).sin())
                        .sum::<f64>()
            })
            .collect()
    }
}

impl ProbabilityModel for Softmax {
    fn probs(&self, theta: &[f64], alpha: usize, out: &mut [f64]) {
        let z = self.logits(theta, alpha);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = z.iter().map(|x| (x - m).exp()).sum();
        for (o, x) in out.iter_mut().zip(&z) {
            *o = (x - m).exp() / s;
        }
    }

    fn prob_grads(&self, theta: &[f64], alpha: usize, out: &mut [f64]) -> bool {
        let mut p = vec![0.0; self.l];
        self.probs(theta, alpha, &mut p);
        for k in 0..self.dim {
            let s: Vec<f64> = (0..self.l)
                .map(|j| self.a[self.idx(alpha, j, k)] * (theta[k] + self.b[self.idx(alpha, j, k)]).cos())
                .collect();
            let mean: f64 = p.iter().zip(&s).map(|(pj, sj)| pj * sj).sum();
            for j in 0..self.l {
                out[j * self.dim + k] = p[j] * (s[j] - mean);
            }
        }
        true
    }

    fn has_grad(&self) -> bool {
        true
    }
}

pub fn softmax_family(seed: u64) -> ParametricFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.random_range(2..=5);
    let d = rng.random_range(1..=4);
    let dim = rng.random_range(1..=2);
    let n = d * l * dim;
    let model = Softmax {
        l,
        dim,
        a: (0..n).map(|_| rng.random_range(-1.5..1.5)).collect(),
        b: (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
        c: (0..d * l).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    ParametricFamily::new(
        format!("softmax_{seed}"),
        Alphabet::indexed(l).unwrap(),
        ComponentSet::indexed(d).unwrap(),
        ParameterBox::new(vec![-1.0; dim], vec![1.0; dim]).unwrap(),
        Regularity::C3,
        Arc::new(model),
    )
    .unwrap()
}

pub fn random_hermitian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(scale * rng.random_range(-1.0..1.0), 0.0);
        for j in (i + 1)..n {
            let z = scale * C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Random QND system with `d ≤ 3` components, a probe of dimension `l ≤ 4`
/// and a 1- or 2-dimensional parameter on `[0.2, 1]^D`. Draws are retried
/// with the next sub-seed until every outcome probability is positive.
pub fn random_qnd(seed: u64) -> (QndSystem, ParametricFamily) {
    for attempt in 0.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(attempt));
        let d = rng.random_range(1..=3);
        let l = rng.random_range(2..=4);
        let dim = rng.random_range(1..=2);
        let offsets = (0..d).map(|_| random_hermitian(l, 0.5, &mut rng)).collect();
        let gens = (0..d).map(|_| (0..dim).map(|_| random_hermitian(l, 2.0, &mut rng)).collect()).collect();
        let mut probe: Vec<C64> =
            (0..l).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let nrm = probe.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        probe.iter_mut().for_each(|z| *z /= nrm);
        let sys = QndSystem::new(d, Arc::new(LinearHamiltonians::new(offsets, gens).unwrap()), probe).unwrap();
        let domain = ParameterBox::new(vec![0.2; dim], vec![1.0; dim]).unwrap();
        if let Ok(fam) = sys.as_family(&format!("qnd_{seed}"), domain) {
            return (sys, fam);
        }
    }
    unreachable!()
}

/// Two-outcome, two-component instance with `p(0|α) = cos²(αθ/2)`, built
/// through the QND path.
pub fn tiny_instance() -> (QndSystem, ParametricFamily) {
    let sys = qnd_core::presets::qubit_rotation_system(2).unwrap();
    let fam = sys.as_family("tiny", qnd_core::presets::qubit_rotation_box()).unwrap();
    (sys, fam)
}

/// Direct closed form of the tiny instance.
pub fn tiny_prob(theta: f64, alpha: usize, j: usize) -> f64 {
    let c = ((alpha + 1) as f64 * theta / 2.0).cos().powi(2);
    if j == 0 {
        c
    } else {
        1.0 - c
    }
}

/// All sequences over `{0, 1}` of length `n`.
pub fn binary_sequences(n: usize) -> Vec<Vec<usize>> {
    (0..1usize << n).map(|m| (0..n).map(|i| (m >> i) & 1).collect()).collect()
}
