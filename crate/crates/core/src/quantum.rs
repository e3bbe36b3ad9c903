//! Quantum non-demolition measurement: parametric families induced by
//! system–probe unitaries `U = Σ_α π_{e_α} ⊗ U_α(θ)`, and the filter that
//! tracks the conditional system state and posterior weights.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{
    Alphabet, ComponentSet, MixtureWeights, ParameterBox, ParametricFamily, ProbabilityModel,
    Regularity,
};
use crate::linalg::{
    canonical_phase, expm_neg_i_derivative, expm_neg_i_from, hermitian_eigen, inner, norm,
    ComplexMatrix, C64,
};

/// Posterior entries below this are treated as underflowed and dropped.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;
const STATE_TOL: f64 = 1e-12;

/// Rule `(θ, α) ↦ H_α(θ)` with optional derivatives `∂_{θ_k} H_α(θ)`.
pub trait HamiltonianModel: Send + Sync {
    fn param_dim(&self) -> usize;
    fn hamiltonian(&self, theta: &[f64], alpha: usize) -> ComplexMatrix;
    fn hamiltonian_grad(&self, _theta: &[f64], _alpha: usize, _k: usize) -> Option<ComplexMatrix> {
        None
    }
}

/// `H_α(θ) = G_α + Σ_k θ_k H_{α,k}`.
#[derive(Debug, Clone)]
pub struct LinearHamiltonians {
    offsets: Vec<ComplexMatrix>,
    generators: Vec<Vec<ComplexMatrix>>,
}

impl LinearHamiltonians {
    pub fn new(offsets: Vec<ComplexMatrix>, generators: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        if offsets.is_empty() || offsets.len() != generators.len() {
            return Err(Error::construction("need one offset and one generator list per component"));
        }
        let n = offsets[0].rows();
        let dim = generators[0].len();
        for (g, gens) in offsets.iter().zip(&generators) {
            if gens.len() != dim || dim == 0 {
                return Err(Error::construction("every component needs the same number of generators"));
            }
            for m in std::iter::once(g).chain(gens) {
                if m.rows() != n || m.cols() != n || !m.is_hermitian(STATE_TOL) {
                    return Err(Error::construction(format!(
                        "generators must be Hermitian {n}x{n} matrices"
                    )));
                }
            }
        }
        Ok(Self { offsets, generators })
    }

    /// `H_α(θ) = θ·H_α` with a scalar parameter.
    pub fn scalar(generators: Vec<ComplexMatrix>) -> Result<Self> {
        let n = generators.first().map(|m| m.rows()).unwrap_or(0);
        let offsets = vec![ComplexMatrix::zeros(n, n); generators.len()];
        Self::new(offsets, generators.into_iter().map(|g| vec![g]).collect())
    }
}

impl HamiltonianModel for LinearHamiltonians {
    fn param_dim(&self) -> usize {
        self.generators[0].len()
    }

    fn hamiltonian(&self, theta: &[f64], alpha: usize) -> ComplexMatrix {
        self.generators[alpha]
            .iter()
            .zip(theta)
            .fold(self.offsets[alpha].clone(), |acc, (g, t)| acc.add(&g.scale(C64::new(*t, 0.0))))
    }

    fn hamiltonian_grad(&self, _theta: &[f64], alpha: usize, k: usize) -> Option<ComplexMatrix> {
        Some(self.generators[alpha][k].clone())
    }
}

/// System of dimension `d` (pointer basis `e_α`) coupled to a probe of
/// dimension `l` prepared in `ψ` and measured in the basis `{ψ_j}`.
#[derive(Clone)]
pub struct QndSystem {
    system_dim: usize,
    probe_dim: usize,
    hamiltonians: Arc<dyn HamiltonianModel>,
    probe: Vec<C64>,
    /// Columns are the measurement vectors `ψ_j`.
    probe_basis: ComplexMatrix,
}

impl fmt::Debug for QndSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QndSystem")
            .field("system_dim", &self.system_dim)
            .field("probe_dim", &self.probe_dim)
            .field("param_dim", &self.param_dim())
            .field("probe", &self.probe)
            .finish()
    }
}

impl QndSystem {
    /// Probe measured in the canonical basis.
    pub fn new(
        system_dim: usize,
        hamiltonians: Arc<dyn HamiltonianModel>,
        probe: Vec<C64>,
    ) -> Result<Self> {
        let l = probe.len();
        Self::with_basis(system_dim, hamiltonians, probe, ComplexMatrix::identity(l))
    }

    pub fn with_basis(
        system_dim: usize,
        hamiltonians: Arc<dyn HamiltonianModel>,
        probe: Vec<C64>,
        probe_basis: ComplexMatrix,
    ) -> Result<Self> {
        let l = probe.len();
        if system_dim == 0 || l < 2 {
            return Err(Error::construction("need d ≥ 1 components and a probe of dimension ≥ 2"));
        }
        if (norm(&probe) - 1.0).abs() > STATE_TOL {
            return Err(Error::construction(format!("probe state has norm {}", norm(&probe))));
        }
        if probe_basis.rows() != l || probe_basis.cols() != l {
            return Err(Error::construction("probe basis must be l × l"));
        }
        if probe_basis.unitarity_defect() > STATE_TOL {
            return Err(Error::construction("probe basis is not orthonormal"));
        }
        Ok(Self { system_dim, probe_dim: l, hamiltonians, probe, probe_basis })
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn param_dim(&self) -> usize {
        self.hamiltonians.param_dim()
    }

    pub fn probe(&self) -> &[C64] {
        &self.probe
    }

    fn check(&self, theta: &[f64], alpha: usize) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::domain(format!(
                "parameter has dimension {}, system expects {}",
                theta.len(),
                self.param_dim()
            )));
        }
        if alpha >= self.system_dim {
            return Err(Error::domain(format!("component {alpha} out of range (d = {})", self.system_dim)));
        }
        Ok(())
    }

    fn generator(&self, theta: &[f64], alpha: usize) -> Result<ComplexMatrix> {
        self.check(theta, alpha)?;
        let h = self.hamiltonians.hamiltonian(theta, alpha);
        if h.rows() != self.probe_dim || !h.is_hermitian(1e-12 * h.frobenius_norm().max(1.0)) {
            return Err(Error::construction(format!(
                "H_α(θ) for α = {alpha}, θ = {theta:?} is not a Hermitian {0}x{0} matrix",
                self.probe_dim
            )));
        }
        Ok(h)
    }

    /// `U_α(θ) = exp(-i H_α(θ))`.
    pub fn unitary(&self, theta: &[f64], alpha: usize) -> Result<ComplexMatrix> {
        let h = self.generator(theta, alpha)?;
        Ok(expm_neg_i_from(&hermitian_eigen(&h)?))
    }

    /// `⟨ψ_j, U_α(θ) ψ⟩` for every `j`.
    pub fn amplitudes(&self, theta: &[f64], alpha: usize) -> Result<Vec<C64>> {
        let u_psi = self.unitary(theta, alpha)?.matvec(&self.probe);
        Ok((0..self.probe_dim).map(|j| inner(&self.probe_basis.column(j), &u_psi)).collect())
    }

    /// `p_θ(j|α) = |⟨ψ_j, U_α(θ) ψ⟩|²`.
    pub fn outcome_probs(&self, theta: &[f64], alpha: usize) -> Result<Vec<f64>> {
        Ok(self.amplitudes(theta, alpha)?.iter().map(|a| a.norm_sqr()).collect())
    }

    /// Exact `∂_{θ_k} p_θ(j|α)` as an `l × D` table, differentiating the
    /// exponential in the eigenbasis of `H_α(θ)`.
    pub fn prob_grads(&self, theta: &[f64], alpha: usize) -> Result<Option<Vec<f64>>> {
        let h = self.generator(theta, alpha)?;
        let dim = self.param_dim();
        let eig = hermitian_eigen(&h)?;
        let u_psi = expm_neg_i_from(&eig).matvec(&self.probe);
        let basis: Vec<Vec<C64>> = (0..self.probe_dim).map(|j| self.probe_basis.column(j)).collect();
        let amps: Vec<C64> = basis.iter().map(|b| inner(b, &u_psi)).collect();
        let mut out = vec![0.0; self.probe_dim * dim];
        for k in 0..dim {
            let Some(dh) = self.hamiltonians.hamiltonian_grad(theta, alpha, k) else {
                return Ok(None);
            };
            let du_psi = expm_neg_i_derivative(&eig, &dh).matvec(&self.probe);
            for (j, b) in basis.iter().enumerate() {
                out[j * dim + k] = 2.0 * (amps[j].conj() * inner(b, &du_psi)).re;
            }
        }
        Ok(Some(out))
    }

    /// Score through `∂_{θ_k} ln p = 2 Im(⟨ψ_j, ∂_k H U ψ⟩ / ⟨ψ_j, U ψ⟩)`.
    /// Exact when `∂_k H_α` commutes with `H_α`, as for `H_α(θ) = θ H_α`.
    pub fn score_formula(&self, theta: &[f64], alpha: usize) -> Result<Vec<f64>> {
        self.generator(theta, alpha)?;
        let dim = self.param_dim();
        let u_psi = self.unitary(theta, alpha)?.matvec(&self.probe);
        let mut out = vec![0.0; self.probe_dim * dim];
        for k in 0..dim {
            let dh = self.hamiltonians.hamiltonian_grad(theta, alpha, k).ok_or_else(|| {
                Error::Capability("system has no Hamiltonian derivatives".into())
            })?;
            let dh_u_psi = dh.matvec(&u_psi);
            for j in 0..self.probe_dim {
                let b = self.probe_basis.column(j);
                out[j * dim + k] = 2.0 * (inner(&b, &dh_u_psi) / inner(&b, &u_psi)).im;
            }
        }
        Ok(out)
    }

    /// `(I_θ(α))_{kl} = 4 Σ_j p Im(·)_k Im(·)_l` from the score formula.
    pub fn fisher_formula(&self, theta: &[f64], alpha: usize) -> Result<Vec<f64>> {
        let p = self.outcome_probs(theta, alpha)?;
        let s = self.score_formula(theta, alpha)?;
        let dim = self.param_dim();
        let mut m = vec![0.0; dim * dim];
        for (j, pj) in p.iter().enumerate() {
            for k in 0..dim {
                for l in 0..dim {
                    m[k * dim + l] += pj * s[j * dim + k] * s[j * dim + l];
                }
            }
        }
        Ok(m)
    }

    /// Family `p_θ(j|α) = |⟨ψ_j, U_α(θ) ψ⟩|²` on `domain`; fails when some
    /// probability on the validation grid leaves `(ε, 1-ε)`.
    pub fn as_family(&self, name: &str, domain: ParameterBox) -> Result<ParametricFamily> {
        if domain.dim() != self.param_dim() {
            return Err(Error::construction("box dimension does not match the Hamiltonian parameters"));
        }
        // evaluate once so that non-Hermitian generators surface as errors
        self.unitary(&domain.center(), 0)?;
        let alphabet = Alphabet::new((0..self.probe_dim).map(|j| format!("psi{j}")).collect())?;
        let components = ComponentSet::new((0..self.system_dim).map(|a| format!("e{a}")).collect())?;
        let model = QndModel { system: self.clone() };
        ParametricFamily::new(name, alphabet, components, domain, Regularity::C3, Arc::new(model))
    }
}

struct QndModel {
    system: QndSystem,
}

impl ProbabilityModel for QndModel {
    fn probs(&self, theta: &[f64], alpha: usize, out: &mut [f64]) {
        match self.system.outcome_probs(theta, alpha) {
            Ok(p) => out.copy_from_slice(&p),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn prob_grads(&self, theta: &[f64], alpha: usize, out: &mut [f64]) -> bool {
        match self.system.prob_grads(theta, alpha) {
            Ok(Some(g)) => {
                out.copy_from_slice(&g);
                true
            }
            Ok(None) => false,
            Err(_) => {
                out.fill(f64::NAN);
                true
            }
        }
    }

    fn has_grad(&self) -> bool {
        let dim = self.system.param_dim();
        let zero = vec![0.0; dim];
        (0..dim).all(|k| self.system.hamiltonians.hamiltonian_grad(&zero, 0, k).is_some())
    }
}

/// Conditional system state `φ_n` (when tracked) and posterior `q_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub phi: Option<Vec<C64>>,
    pub q: Vec<f64>,
    pub step: usize,
}

impl FilterState {
    pub fn map_component(&self) -> usize {
        (0..self.q.len())
            .max_by(|&a, &b| self.q[a].total_cmp(&self.q[b]).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    /// `max_α | |⟨e_α, φ⟩|² - q(α) |`, or 0 when `φ` is not tracked.
    pub fn representation_gap(&self) -> f64 {
        self.phi.as_ref().map_or(0.0, |phi| {
            phi.iter().zip(&self.q).fold(0.0f64, |m, (c, q)| m.max((c.norm_sqr() - q).abs()))
        })
    }
}

/// Filter at a fixed parameter: the outcome table `p_θ(j|α)` and, in quantum
/// mode, the amplitudes `⟨ψ_j, U_α ψ⟩`.
#[derive(Debug, Clone)]
pub struct Filter {
    probs: Vec<Vec<f64>>,
    amplitudes: Option<Vec<Vec<C64>>>,
}

impl Filter {
    /// Posterior-only filter for a classical mixture.
    pub fn from_family(fam: &ParametricFamily, theta: &[f64]) -> Result<Self> {
        Ok(Self { probs: fam.prob_table(theta)?, amplitudes: None })
    }

    /// Filter that also propagates the conditional state `φ_n`.
    pub fn from_system(sys: &QndSystem, theta: &[f64]) -> Result<Self> {
        let amps: Vec<Vec<C64>> =
            (0..sys.system_dim()).map(|a| sys.amplitudes(theta, a)).collect::<Result<_>>()?;
        let probs = amps.iter().map(|row| row.iter().map(|z| z.norm_sqr()).collect()).collect();
        Ok(Self { probs, amplitudes: Some(amps) })
    }

    pub fn n_components(&self) -> usize {
        self.probs.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs[0].len()
    }

    pub fn tracks_state(&self) -> bool {
        self.amplitudes.is_some()
    }

    /// Initial state from prior weights on the simplex (point masses allowed).
    pub fn initial(&self, q0: &[f64]) -> Result<FilterState> {
        if q0.len() != self.n_components() {
            return Err(Error::domain("prior length does not match the number of components"));
        }
        let sum: f64 = q0.iter().sum();
        if q0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (sum - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("prior {q0:?} is not on the simplex")));
        }
        let phi = self.amplitudes.as_ref().map(|_| {
            let mut v: Vec<C64> = q0.iter().map(|x| C64::new(x.sqrt(), 0.0)).collect();
            canonical_phase(&mut v);
            v
        });
        Ok(FilterState { phi, q: q0.to_vec(), step: 0 })
    }

    pub fn initial_from_weights(&self, q0: &MixtureWeights) -> Result<FilterState> {
        self.initial(q0.as_slice())
    }

    /// Initial state from a pure system state; `q_0(α) = |⟨e_α, φ_0⟩|²`.
    pub fn initial_from_state(&self, phi0: &[C64]) -> Result<FilterState> {
        if !self.tracks_state() {
            return Err(Error::Capability("a classical filter cannot carry a system state".into()));
        }
        if phi0.len() != self.n_components() || (norm(phi0) - 1.0).abs() > 1e-10 {
            return Err(Error::domain("initial system state must be a unit vector of length d"));
        }
        let mut phi = phi0.to_vec();
        canonical_phase(&mut phi);
        let q = phi.iter().map(|c| c.norm_sqr()).collect();
        Ok(FilterState { phi: Some(phi), q, step: 0 })
    }

    /// One Bayes update `q'(α) = q(α) p(j|α) / π(j)`, with the state update
    /// `φ' ∝ Σ_α ⟨e_α, φ⟩ ⟨ψ_j, U_α ψ⟩ e_α` in quantum mode.
    pub fn step(&self, state: &FilterState, j: usize) -> Result<FilterState> {
        if j >= self.alphabet_size() {
            return Err(Error::domain(format!("outcome {j} out of range")));
        }
        let mut q: Vec<f64> = state.q.iter().zip(&self.probs).map(|(w, p)| w * p[j]).collect();
        let pi: f64 = q.iter().sum();
        if !(pi > 0.0) {
            return Err(Error::Inference(format!(
                "outcome {j} at step {} has zero probability under the current posterior",
                state.step + 1
            )));
        }
        for w in q.iter_mut() {
            *w /= pi;
            if *w < UNDERFLOW_FLOOR {
                *w = 0.0;
            }
        }
        let s: f64 = q.iter().sum();
        if s != 1.0 {
            q.iter_mut().for_each(|w| *w /= s);
        }

        let phi = match (&state.phi, &self.amplitudes) {
            (Some(phi), Some(amps)) => {
                let mut next: Vec<C64> = phi.iter().zip(amps).map(|(c, a)| c * a[j]).collect();
                for c in next.iter_mut() {
                    if c.norm_sqr() < UNDERFLOW_FLOOR * pi {
                        *c = C64::new(0.0, 0.0);
                    }
                }
                let nrm = norm(&next);
                next.iter_mut().for_each(|c| *c /= nrm);
                canonical_phase(&mut next);
                Some(next)
            }
            _ => None,
        };
        Ok(FilterState { phi, q, step: state.step + 1 })
    }

    /// Full path `[s_0, s_1, …, s_n]`.
    pub fn run(&self, initial: FilterState, outcomes: &[usize]) -> Result<Vec<FilterState>> {
        let mut path = Vec::with_capacity(outcomes.len() + 1);
        path.push(initial);
        for &j in outcomes {
            let next = self.step(path.last().unwrap(), j)?;
            path.push(next);
        }
        Ok(path)
    }

    /// Final state only.
    pub fn run_final(&self, initial: FilterState, outcomes: &[usize]) -> Result<FilterState> {
        outcomes.iter().try_fold(initial, |s, &j| self.step(&s, j))
    }
}

/// Either side of a filter: a classical family or a quantum system.
#[derive(Debug, Clone, Copy)]
pub enum FilterModel<'a> {
    Family(&'a ParametricFamily),
    Quantum(&'a QndSystem),
}

impl FilterModel<'_> {
    pub fn filter(&self, theta: &[f64]) -> Result<Filter> {
        match self {
            FilterModel::Family(f) => Filter::from_family(f, theta),
            FilterModel::Quantum(s) => Filter::from_system(s, theta),
        }
    }
}

pub fn filter_step(model: FilterModel<'_>, state: &FilterState, theta: &[f64], j: usize) -> Result<FilterState> {
    model.filter(theta)?.step(state, j)
}

pub fn filter_trajectory(
    model: FilterModel<'_>,
    initial: FilterState,
    theta: &[f64],
    outcomes: &[usize],
) -> Result<Vec<FilterState>> {
    model.filter(theta)?.run(initial, outcomes)
}

/// Posterior after observing `counts`, computed directly from
/// `q_0(α) Π_j p(j|α)^{N(j)}` in the log domain.
pub fn posterior_from_counts(probs: &[Vec<f64>], q0: &[f64], counts: &[u64]) -> Vec<f64> {
    let logs: Vec<f64> = probs
        .iter()
        .zip(q0)
        .map(|(p, w)| {
            if *w == 0.0 {
                f64::NEG_INFINITY
            } else {
                w.ln() + p.iter().zip(counts).map(|(pj, n)| *n as f64 * pj.ln()).sum::<f64>()
            }
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}
