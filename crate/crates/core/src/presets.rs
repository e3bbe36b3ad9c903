//! Built-in closed-form models.
//!
//! `toy_haroche` is the photon-counting QND experiment: eight outcomes
//! `j ≡ (x, a)` with `x ∈ {0,1}`, `a ∈ {0,…,3}`, and
//! `p_θ(x,a|n) = (1 + v cos(nθ + (2-a)π/4 + xπ)) / 8` with visibility
//! `v = 0.674`, photon numbers `n ∈ {1,…,8}`, and the phase `θ` as the
//! unknown.
//!
//! `qubit_rotation` is a two-level probe rotated by `exp(-iθ n σ_x / 2)`.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{
    Alphabet, ComponentSet, MixtureWeights, ParameterBox, ParametricFamily, ProbabilityModel,
    Regularity,
};
use crate::linalg::{ComplexMatrix, C64};
use crate::quantum::{LinearHamiltonians, QndSystem};

pub const TOY_VISIBILITY: f64 = 0.674;
pub const TOY_POISSON_RATE: f64 = 3.46;
pub const TOY_THETA_STAR: f64 = FRAC_PI_4;
/// Half-width of the window around `π/4` on which every pair of
/// (photon number, phase) laws is distinct.
pub const TOY_ID_HALF_WIDTH: f64 = PI / 64.0;
pub const QUBIT_THETA_STAR: f64 = 0.75;

/// Phase offset `(2-a)π/4 + xπ` of outcome `j = 4x + a`.
fn toy_offset(j: usize) -> f64 {
    let x = (j / 4) as f64;
    let a = (j % 4) as f64;
    (2.0 - a) * FRAC_PI_4 + x * PI
}

/// Single-parameter photon-counting model.
#[derive(Debug, Clone)]
pub struct ToyHaroche {
    photon_numbers: Vec<u32>,
    visibility: f64,
}

impl ToyHaroche {
    pub fn new(photon_numbers: Vec<u32>, visibility: f64) -> Self {
        Self { photon_numbers, visibility }
    }
}

impl ProbabilityModel for ToyHaroche {
    fn probs(&self, theta: &[f64], alpha: usize, out: &mut [f64]) {
        let n = self.photon_numbers[alpha] as f64;
        for (j, p) in out.iter_mut().enumerate() {
            *p = (1.0 + self.visibility * (n * theta[0] + toy_offset(j)).cos()) / 8.0;
        }
    }

    fn prob_grads(&self, theta: &[f64], alpha: usize, out: &mut [f64]) -> bool {
        let n = self.photon_numbers[alpha] as f64;
        for (j, g) in out.iter_mut().enumerate() {
            *g = -self.visibility * n * (n * theta[0] + toy_offset(j)).sin() / 8.0;
        }
        true
    }

    fn has_grad(&self) -> bool {
        true
    }
}

/// Two-parameter variant `θ = (phase, visibility)`.
#[derive(Debug, Clone)]
pub struct ToyHarocheVisibility {
    photon_numbers: Vec<u32>,
}

impl ProbabilityModel for ToyHarocheVisibility {
    fn probs(&self, theta: &[f64], alpha: usize, out: &mut [f64]) {
        let n = self.photon_numbers[alpha] as f64;
        for (j, p) in out.iter_mut().enumerate() {
            *p = (1.0 + theta[1] * (n * theta[0] + toy_offset(j)).cos()) / 8.0;
        }
    }

    fn prob_grads(&self, theta: &[f64], alpha: usize, out: &mut [f64]) -> bool {
        let n = self.photon_numbers[alpha] as f64;
        for j in 0..8 {
            let phase = n * theta[0] + toy_offset(j);
            out[2 * j] = -theta[1] * n * phase.sin() / 8.0;
            out[2 * j + 1] = phase.cos() / 8.0;
        }
        true
    }

    fn has_grad(&self) -> bool {
        true
    }
}

fn toy_alphabet() -> Alphabet {
    Alphabet::new(
        (0..8)
            .map(|j| format!("x{}a{}", j / 4, j % 4))
            .collect(),
    )
    .expect("eight distinct labels")
}

fn photon_components(ns: &[u32]) -> Result<ComponentSet> {
    ComponentSet::new(ns.iter().map(|n| format!("n={n}")).collect())
}

pub fn toy_default_photon_numbers() -> Vec<u32> {
    (1..=8).collect()
}

/// The toy family on `Θ = [π/8, 3π/8]` with photon numbers `1..=8`.
pub fn toy_haroche_family() -> Result<ParametricFamily> {
    toy_haroche_family_with(&toy_default_photon_numbers(), TOY_VISIBILITY)
}

pub fn toy_haroche_family_with(photon_numbers: &[u32], visibility: f64) -> Result<ParametricFamily> {
    if !(visibility > 0.0 && visibility < 1.0) {
        return Err(Error::construction(format!("visibility must lie in (0, 1), got {visibility}")));
    }
    ParametricFamily::new(
        "toy_haroche",
        toy_alphabet(),
        photon_components(photon_numbers)?,
        ParameterBox::interval(PI / 8.0, 3.0 * PI / 8.0)?,
        Regularity::C3,
        Arc::new(ToyHaroche::new(photon_numbers.to_vec(), visibility)),
    )
}

/// Phase and visibility both unknown, on a box around `(π/4, 0.674)`.
pub fn toy_haroche_visibility_family() -> Result<ParametricFamily> {
    let ns = toy_default_photon_numbers();
    ParametricFamily::new(
        "toy_haroche_visibility",
        toy_alphabet(),
        photon_components(&ns)?,
        ParameterBox::new(
            vec![TOY_THETA_STAR - TOY_ID_HALF_WIDTH, 0.6],
            vec![TOY_THETA_STAR + TOY_ID_HALF_WIDTH, 0.75],
        )?,
        Regularity::C3,
        Arc::new(ToyHarocheVisibility { photon_numbers: ns }),
    )
}

/// `I_θ(n) = Σ_{a=0}^{3} n² (v²/4) sin²(nθ + (2-a)π/4) / (1 - v² cos²(nθ + (2-a)π/4))`.
pub fn toy_fisher_closed_form(theta: f64, photon_number: u32, visibility: f64) -> f64 {
    let n = photon_number as f64;
    (0..4)
        .map(|a| {
            let phase = n * theta + (2.0 - a as f64) * FRAC_PI_4;
            n * n * visibility * visibility / 4.0 * phase.sin().powi(2)
                / (1.0 - visibility * visibility * phase.cos().powi(2))
        })
        .sum()
}

/// `H_n = (n/2) σ_x`, `ψ = |0⟩`, components `n = 1..=d`.
pub fn qubit_rotation_system(d: usize) -> Result<QndSystem> {
    let sigma_x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])?;
    let gens = (1..=d).map(|n| sigma_x.scale(C64::new(n as f64 / 2.0, 0.0))).collect();
    QndSystem::new(
        d,
        Arc::new(LinearHamiltonians::scalar(gens)?),
        vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
    )
}

pub fn qubit_rotation_box() -> ParameterBox {
    ParameterBox::interval(0.3, 1.2).expect("valid interval")
}

/// Named preset with its default experiment settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    ToyHaroche,
    ToyHarocheVisibility,
    QubitRotation,
}

impl PresetName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toy_haroche" => Ok(Self::ToyHaroche),
            "toy_haroche_visibility" => Ok(Self::ToyHarocheVisibility),
            "qubit_rotation" => Ok(Self::QubitRotation),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected toy_haroche, toy_haroche_visibility or qubit_rotation)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ToyHaroche => "toy_haroche",
            Self::ToyHarocheVisibility => "toy_haroche_visibility",
            Self::QubitRotation => "qubit_rotation",
        }
    }
}

/// A family plus the defaults experiments use for it.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    pub family: ParametricFamily,
    pub system: Option<QndSystem>,
    pub theta_star: Vec<f64>,
    pub q: MixtureWeights,
    /// Sub-box the estimators search.
    pub search_box: ParameterBox,
}

pub fn toy_haroche() -> Result<Preset> {
    let family = toy_haroche_family()?;
    Ok(Preset {
        name: PresetName::ToyHaroche,
        q: MixtureWeights::poisson_like(TOY_POISSON_RATE, &toy_default_photon_numbers())?,
        theta_star: vec![TOY_THETA_STAR],
        search_box: ParameterBox::interval(
            TOY_THETA_STAR - TOY_ID_HALF_WIDTH,
            TOY_THETA_STAR + TOY_ID_HALF_WIDTH,
        )?,
        family,
        system: None,
    })
}

pub fn toy_haroche_visibility() -> Result<Preset> {
    let family = toy_haroche_visibility_family()?;
    Ok(Preset {
        name: PresetName::ToyHarocheVisibility,
        q: MixtureWeights::poisson_like(TOY_POISSON_RATE, &toy_default_photon_numbers())?,
        theta_star: vec![TOY_THETA_STAR, TOY_VISIBILITY],
        search_box: family.domain().clone(),
        family,
        system: None,
    })
}

pub fn qubit_rotation() -> Result<Preset> {
    qubit_rotation_with(2)
}

pub fn qubit_rotation_with(d: usize) -> Result<Preset> {
    let system = qubit_rotation_system(d)?;
    let family = system.as_family("qubit_rotation", qubit_rotation_box())?;
    let search_box = qubit_rotation_search_box(d)?;
    let theta_star = if search_box.contains_interior(&[QUBIT_THETA_STAR]) {
        QUBIT_THETA_STAR
    } else {
        search_box.center()[0]
    };
    Ok(Preset {
        name: PresetName::QubitRotation,
        q: MixtureWeights::uniform(d)?,
        theta_star: vec![theta_star],
        search_box,
        family,
        system: Some(system),
    })
}

/// Sub-box of the qubit domain on which the laws `cos²(nθ/2)` are pairwise
/// distinct. Component `n` maps the box to `[nL/2, nU/2]`; these ranges must
/// stay inside `(0, π/2)` and not overlap, so `U < π/d` and `L > (d-1)U/d`.
/// On the full domain `(n, θ)` and `(2n, θ/2)` coincide.
pub fn qubit_rotation_search_box(d: usize) -> Result<ParameterBox> {
    let full = qubit_rotation_box();
    if d <= 1 {
        return Ok(full);
    }
    let df = d as f64;
    let upper = full.upper()[0].min(0.95 * PI / df);
    let lower = full.lower()[0].max(upper * (df - 1.0) / df + 0.05 * upper / df);
    ParameterBox::interval(lower, upper)
}

pub fn preset(name: PresetName) -> Result<Preset> {
    match name {
        PresetName::ToyHaroche => toy_haroche(),
        PresetName::ToyHarocheVisibility => toy_haroche_visibility(),
        PresetName::QubitRotation => qubit_rotation(),
    }
}
