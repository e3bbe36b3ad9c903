//! Seeded measurement records under `ℙ_{θ|γ}` and under the mixture `ℙ_θ`.
//!
//! Every stream is a `ChaCha8Rng` seeded with `derive_seed(master, index)`, a
//! SplitMix64 mix of the master seed and the stream index, so a record
//! depends only on its seed and never on scheduling.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MixtureWeights, ParametricFamily};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed of stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Sub-seed for a path of indices, e.g. `(experiment, component, replicate)`.
pub fn derive_seed_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &i| derive_seed(s, i))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse-CDF sampler over a finite alphabet.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    cdf: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self { cdf }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }
}

/// A finite record, with the hidden component that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub gamma: usize,
    pub theta_true: Vec<f64>,
    pub outcomes: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// One row per step: `index, outcome` (label).
    pub fn write_csv<W: Write>(&self, fam: &ParametricFamily, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "outcome"])?;
        for (k, &j) in self.outcomes.iter().enumerate() {
            w.write_record([(k + 1).to_string().as_str(), fam.alphabet().label(j)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Counts `N_n(j)` of each outcome among the first `n` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    pub n: u64,
    pub counts: Vec<u64>,
}

impl CountVector {
    pub fn zeros(l: usize) -> Self {
        Self { n: 0, counts: vec![0; l] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { n: counts.iter().sum(), counts }
    }

    pub fn from_outcomes(l: usize, outcomes: &[usize]) -> Result<Self> {
        let mut c = Self::zeros(l);
        for &j in outcomes {
            c.push(j)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, j: usize) -> Result<()> {
        let slot = self
            .counts
            .get_mut(j)
            .ok_or_else(|| Error::domain(format!("outcome {j} outside the alphabet")))?;
        *slot += 1;
        self.n += 1;
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

/// Counts over the first `n_prefix` outcomes.
pub fn counts(traj: &Trajectory, l: usize, n_prefix: usize) -> Result<CountVector> {
    if n_prefix > traj.len() {
        return Err(Error::domain(format!(
            "prefix {n_prefix} exceeds trajectory length {}",
            traj.len()
        )));
    }
    CountVector::from_outcomes(l, &traj.outcomes[..n_prefix])
}

/// Draw `γ` with `Pr(γ) = q(γ)`.
pub fn sample_component(q: &MixtureWeights, seed: u64) -> usize {
    CategoricalSampler::new(q.as_slice()).sample(&mut rng_from_seed(seed))
}

/// `n` i.i.d. draws from `p_θ(·|γ)`.
pub fn sample_trajectory(
    fam: &ParametricFamily,
    theta: &[f64],
    gamma: usize,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    let sampler = CategoricalSampler::new(&fam.probs(theta, gamma)?);
    let mut rng = rng_from_seed(seed);
    let outcomes = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    Ok(Trajectory { seed, gamma, theta_true: theta.to_vec(), outcomes })
}

/// Draw `γ ~ q` from sub-stream 0, then the record from sub-stream 1.
pub fn sample_mixture_trajectory(
    fam: &ParametricFamily,
    theta: &[f64],
    q: &MixtureWeights,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    q.check_matches(fam)?;
    let gamma = sample_component(q, derive_seed(seed, 0));
    let mut traj = sample_trajectory(fam, theta, gamma, n, derive_seed(seed, 1))?;
    traj.seed = seed;
    Ok(traj)
}

/// Counts of an i.i.d. `p_θ(·|γ)` record at each checkpoint, drawn from the
/// same stream as `sample_trajectory(fam, theta, gamma, max, seed)`.
/// Checkpoints must be non-decreasing.
pub fn sample_counts_path(
    fam: &ParametricFamily,
    theta: &[f64],
    gamma: usize,
    checkpoints: &[usize],
    seed: u64,
) -> Result<Vec<CountVector>> {
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("checkpoints must be non-decreasing"));
    }
    let sampler = CategoricalSampler::new(&fam.probs(theta, gamma)?);
    let mut rng = rng_from_seed(seed);
    let mut c = CountVector::zeros(fam.alphabet_size());
    let mut out = Vec::with_capacity(checkpoints.len());
    for &n in checkpoints {
        while (c.n as usize) < n {
            c.counts[sampler.sample(&mut rng)] += 1;
            c.n += 1;
        }
        out.push(c.clone());
    }
    Ok(out)
}
