//! Parametric families of multinomial laws over a finite alphabet, indexed by
//! a hidden component and a parameter living in a compact box.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities must lie strictly inside `(PROB_EPS, 1 - PROB_EPS)`.
pub const PROB_EPS: f64 = 1e-12;
/// Tolerance on `Σ_j p(j) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Relative tolerance for analytic gradients against finite differences.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Relative finite-difference step: `h_k = FD_STEP * (1 + |θ_k|)`.
pub const FD_STEP: f64 = 1e-5;

fn check_labels(kind: &str, labels: &[String], min: usize) -> Result<()> {
    if labels.len() < min {
        return Err(Error::construction(format!(
            "{kind} needs at least {min} labels, got {}",
            labels.len()
        )));
    }
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::construction(format!("{kind} label {a:?} is repeated")));
        }
    }
    Ok(())
}

/// Outcome alphabet `{0, …, l-1}` with display labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        check_labels("alphabet", &labels, 2)?;
        Ok(Self { labels })
    }

    /// Alphabet labelled `0, 1, …, size-1`.
    pub fn indexed(size: usize) -> Result<Self> {
        Self::new((0..size).map(|j| j.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, j: usize) -> &str {
        &self.labels[j]
    }
}

/// Hidden components `{0, …, d-1}` with display labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSet {
    labels: Vec<String>,
}

impl ComponentSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        check_labels("component set", &labels, 1)?;
        Ok(Self { labels })
    }

    pub fn indexed(size: usize) -> Result<Self> {
        Self::new((0..size).map(|a| a.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, alpha: usize) -> &str {
        &self.labels[alpha]
    }
}

/// Compact box `Π_k [lower_k, upper_k]` with non-empty interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::construction(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::construction(format!(
                    "box side {k} must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| *lo <= *t && *t <= *hi)
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| *lo < *t && *t < *hi)
    }

    pub fn contains_box(&self, other: &ParameterBox) -> bool {
        self.contains(&other.lower) && self.contains(&other.upper)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::domain(format!(
                "parameter has dimension {}, box has dimension {}",
                theta.len(),
                self.dim()
            )));
        }
        if !self.contains(theta) {
            return Err(Error::domain(format!(
                "parameter {theta:?} lies outside the box [{:?}, {:?}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (k, t) in theta.iter_mut().enumerate() {
            *t = t.clamp(self.lower[k], self.upper[k]);
        }
    }

    /// Map a point of the unit cube onto the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(k, x)| self.lower[k] + x * self.width(k))
            .collect()
    }

    /// `count` equispaced points per axis for `D = 1`, endpoints included.
    pub fn linspace(&self, count: usize) -> Vec<Vec<f64>> {
        assert_eq!(self.dim(), 1, "linspace is only defined on intervals");
        let (lo, hi) = (self.lower[0], self.upper[0]);
        if count == 1 {
            return vec![vec![0.5 * (lo + hi)]];
        }
        (0..count)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (count - 1) as f64])
            .collect()
    }

    /// Points used to validate a family: equispaced for intervals; corners,
    /// centre and a Halton sequence in higher dimension.
    pub fn validation_points(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        if dim == 1 {
            return self.linspace(33);
        }
        let mut points = vec![self.center()];
        if dim <= 6 {
            for mask in 0..(1usize << dim) {
                let u: Vec<f64> = (0..dim).map(|k| ((mask >> k) & 1) as f64).collect();
                points.push(self.from_unit(&u));
            }
        }
        points.extend(halton(dim, 64).iter().map(|u| self.from_unit(u)));
        points
    }
}

const HALTON_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// First `count` points (skipping the origin) of the Halton sequence in `[0,1)^dim`.
pub fn halton(dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(dim <= HALTON_PRIMES.len(), "Halton sequence supports up to 16 dimensions");
    (1..=count as u64)
        .map(|i| (0..dim).map(|k| radical_inverse(i, HALTON_PRIMES[k])).collect())
        .collect()
}

/// Declared smoothness of `θ ↦ p_θ(j|α)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Continuous,
    C1,
    C2,
    C3,
}

/// Where derivatives came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

/// Evaluation rule `(θ, α) ↦ (p_θ(j|α))_j`, optionally with `∂_θ p`.
///
/// Implementations must be pure.
pub trait ProbabilityModel: Send + Sync {
    /// Fill `out` (length `l`) with `p_θ(·|α)`.
    fn probs(&self, theta: &[f64], alpha: usize, out: &mut [f64]);

    /// Fill `out` (row-major `l × D`) with `∂_{θ_k} p_θ(j|α)`. Returns `false`
    /// when the model has no analytic gradient.
    fn prob_grads(&self, _theta: &[f64], _alpha: usize, _out: &mut [f64]) -> bool {
        false
    }

    fn has_grad(&self) -> bool {
        false
    }
}

type ProbFn = dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], usize, usize, &mut [f64]) + Send + Sync;

/// A model given by plain closures `(θ, α, j) ↦ p` and optionally
/// `(θ, α, j, out) ↦ ∂p`.
pub struct ClosureModel {
    alphabet_size: usize,
    dim: usize,
    prob: Box<ProbFn>,
    grad: Option<Box<GradFn>>,
}

impl ClosureModel {
    pub fn new(
        alphabet_size: usize,
        dim: usize,
        prob: impl Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { alphabet_size, dim, prob: Box::new(prob), grad: None }
    }

    pub fn with_grad(
        mut self,
        grad: impl Fn(&[f64], usize, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }
}

impl ProbabilityModel for ClosureModel {
    fn probs(&self, theta: &[f64], alpha: usize, out: &mut [f64]) {
        for (j, p) in out.iter_mut().enumerate().take(self.alphabet_size) {
            *p = (self.prob)(theta, alpha, j);
        }
    }

    fn prob_grads(&self, theta: &[f64], alpha: usize, out: &mut [f64]) -> bool {
        match &self.grad {
            Some(g) => {
                for j in 0..self.alphabet_size {
                    g(theta, alpha, j, &mut out[j * self.dim..(j + 1) * self.dim]);
                }
                true
            }
            None => false,
        }
    }

    fn has_grad(&self) -> bool {
        self.grad.is_some()
    }
}

/// The map `(θ, α, j) ↦ p_θ(j|α)` together with its index sets and domain.
#[derive(Clone)]
pub struct ParametricFamily {
    name: String,
    alphabet: Alphabet,
    components: ComponentSet,
    domain: ParameterBox,
    regularity: Regularity,
    model: Arc<dyn ProbabilityModel>,
}

impl fmt::Debug for ParametricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricFamily")
            .field("name", &self.name)
            .field("alphabet", &self.alphabet.size())
            .field("components", &self.components.size())
            .field("domain", &self.domain)
            .field("regularity", &self.regularity)
            .field("analytic_grad", &self.model.has_grad())
            .finish()
    }
}

impl ParametricFamily {
    /// Build and validate a family on the box's validation points: each law
    /// must be normalized, strictly inside `(ε, 1-ε)`, and any analytic
    /// gradient must agree with finite differences.
    pub fn new(
        name: impl Into<String>,
        alphabet: Alphabet,
        components: ComponentSet,
        domain: ParameterBox,
        regularity: Regularity,
        model: Arc<dyn ProbabilityModel>,
    ) -> Result<Self> {
        let family = Self { name: name.into(), alphabet, components, domain, regularity, model };
        let points = family.domain.validation_points();
        family.validate_on(&points)?;
        Ok(family)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn components(&self) -> &ComponentSet {
        &self.components
    }

    pub fn domain(&self) -> &ParameterBox {
        &self.domain
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size()
    }

    pub fn n_components(&self) -> usize {
        self.components.size()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.model.has_grad()
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        if self.has_analytic_grad() {
            DerivativeSource::Analytic
        } else {
            DerivativeSource::FiniteDifference
        }
    }

    fn check_component(&self, alpha: usize) -> Result<()> {
        if alpha >= self.n_components() {
            return Err(Error::domain(format!(
                "component {alpha} out of range (d = {})",
                self.n_components()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_args(&self, theta: &[f64], alpha: usize) -> Result<()> {
        self.domain.check(theta)?;
        self.check_component(alpha)
    }

    /// Unchecked evaluation used on hot paths after arguments were validated.
    #[inline]
    pub(crate) fn probs_into(&self, theta: &[f64], alpha: usize, out: &mut [f64]) {
        self.model.probs(theta, alpha, out);
    }

    pub fn probs(&self, theta: &[f64], alpha: usize) -> Result<Vec<f64>> {
        self.check_args(theta, alpha)?;
        let mut out = vec![0.0; self.alphabet_size()];
        self.probs_into(theta, alpha, &mut out);
        Ok(out)
    }

    pub fn prob(&self, theta: &[f64], alpha: usize, j: usize) -> Result<f64> {
        if j >= self.alphabet_size() {
            return Err(Error::domain(format!(
                "outcome {j} out of range (l = {})",
                self.alphabet_size()
            )));
        }
        Ok(self.probs(theta, alpha)?[j])
    }

    /// Table `p_θ(j|α)` as `d` rows of length `l`.
    pub fn prob_table(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.n_components()).map(|a| self.probs(theta, a)).collect()
    }

    fn require_c1(&self) -> Result<()> {
        if self.regularity < Regularity::C1 {
            return Err(Error::Capability(format!(
                "family '{}' is only declared continuous; derivatives are unavailable",
                self.name
            )));
        }
        Ok(())
    }

    /// `∂_{θ_k} p_θ(j|α)` as a row-major `l × D` table. Falls back to
    /// central finite differences when the model has no analytic gradient.
    pub fn prob_grads(&self, theta: &[f64], alpha: usize) -> Result<(Vec<f64>, DerivativeSource)> {
        self.require_c1()?;
        self.check_args(theta, alpha)?;
        let mut out = vec![0.0; self.alphabet_size() * self.dim()];
        if self.model.prob_grads(theta, alpha, &mut out) {
            Ok((out, DerivativeSource::Analytic))
        } else {
            Ok((self.fd_prob_grads(theta, alpha), DerivativeSource::FiniteDifference))
        }
    }

    /// Score `∂_{θ_k} ln p_θ(j|α)` as a row-major `l × D` table.
    pub fn scores(&self, theta: &[f64], alpha: usize) -> Result<(Vec<f64>, DerivativeSource)> {
        let (mut grads, source) = self.prob_grads(theta, alpha)?;
        let dim = self.dim();
        let mut p = vec![0.0; self.alphabet_size()];
        self.probs_into(theta, alpha, &mut p);
        for (j, pj) in p.iter().enumerate() {
            for g in &mut grads[j * dim..(j + 1) * dim] {
                *g /= pj;
            }
        }
        Ok((grads, source))
    }

    /// Central differences with step `FD_STEP·(1+|θ_k|)`; second-order
    /// one-sided differences where a central stencil would leave the box.
    pub fn fd_prob_grads(&self, theta: &[f64], alpha: usize) -> Vec<f64> {
        let l = self.alphabet_size();
        let dim = self.dim();
        let mut out = vec![0.0; l * dim];
        let mut shifted = theta.to_vec();
        let mut f1 = vec![0.0; l];
        let mut f2 = vec![0.0; l];
        let mut f0 = vec![0.0; l];
        for k in 0..dim {
            let h = FD_STEP * (1.0 + theta[k].abs());
            let lo = self.domain.lower[k];
            let hi = self.domain.upper[k];
            let mut eval = |x: f64, buf: &mut [f64]| {
                shifted[k] = x;
                self.model.probs(&shifted, alpha, buf);
                shifted[k] = theta[k];
            };
            if theta[k] + h <= hi && theta[k] - h >= lo {
                eval(theta[k] + h, &mut f1);
                eval(theta[k] - h, &mut f2);
                for j in 0..l {
                    out[j * dim + k] = (f1[j] - f2[j]) / (2.0 * h);
                }
            } else {
                let s = if theta[k] + 2.0 * h <= hi { 1.0 } else { -1.0 };
                eval(theta[k], &mut f0);
                eval(theta[k] + s * h, &mut f1);
                eval(theta[k] + 2.0 * s * h, &mut f2);
                for j in 0..l {
                    out[j * dim + k] = s * (-3.0 * f0[j] + 4.0 * f1[j] - f2[j]) / (2.0 * h);
                }
            }
        }
        out
    }

    /// Largest relative discrepancy between analytic and finite-difference
    /// gradients over `points` and all components. `None` without an analytic gradient.
    pub fn gradient_discrepancy(&self, points: &[Vec<f64>]) -> Result<Option<f64>> {
        if !self.has_analytic_grad() {
            return Ok(None);
        }
        let mut worst: f64 = 0.0;
        let mut analytic = vec![0.0; self.alphabet_size() * self.dim()];
        for theta in points {
            self.domain.check(theta)?;
            for alpha in 0..self.n_components() {
                self.model.prob_grads(theta, alpha, &mut analytic);
                let numeric = self.fd_prob_grads(theta, alpha);
                worst = worst.max(relative_discrepancy(&analytic, &numeric));
            }
        }
        Ok(Some(worst))
    }

    fn validate_on(&self, points: &[Vec<f64>]) -> Result<()> {
        let l = self.alphabet_size();
        let mut p = vec![0.0; l];
        for theta in points {
            for alpha in 0..self.n_components() {
                self.model.probs(theta, alpha, &mut p);
                let mut sum = 0.0;
                for (j, &pj) in p.iter().enumerate() {
                    if !(pj > PROB_EPS && pj < 1.0 - PROB_EPS) {
                        return Err(Error::construction(format!(
                            "family '{}': p_θ(j|α) = {pj:e} is not inside (ε, 1-ε) at θ = {theta:?}, α = {alpha}, j = {j}",
                            self.name
                        )));
                    }
                    sum += pj;
                }
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::construction(format!(
                        "family '{}': Σ_j p_θ(j|α) = {sum} at θ = {theta:?}, α = {alpha}",
                        self.name
                    )));
                }
            }
        }
        if let Some(err) = self.gradient_discrepancy(points)? {
            if err > GRADIENT_TOL {
                return Err(Error::construction(format!(
                    "family '{}': analytic gradient disagrees with finite differences (relative error {err:e})",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Max entrywise discrepancy relative to the largest entry of either table.
/// Tables whose entries are all below `1e-4` are compared against `1e-4`,
/// since finite differences carry roundoff of order `1e-11` there.
pub fn relative_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-4);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Mixture weights `q(α) > 0` on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    q: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::construction("mixture weights must be non-empty"));
        }
        if let Some(bad) = q.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::construction(format!(
                "mixture weights must be strictly positive, got {bad}"
            )));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::construction(format!("mixture weights sum to {sum}, not 1")));
        }
        Ok(Self { q })
    }

    /// Normalize positive weights.
    pub fn from_unnormalized(w: &[f64]) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::construction("weights must have a positive finite sum"));
        }
        Self::new(w.iter().map(|x| x / sum).collect())
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::from_unnormalized(&vec![1.0; d])
    }

    /// `q(α) ∝ λ^{n_α} / n_α!` for the given occupation numbers.
    pub fn poisson_like(lambda: f64, occupations: &[u32]) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::construction(format!("poisson-like rate must be positive, got {lambda}")));
        }
        let w: Vec<f64> = occupations
            .iter()
            .map(|&n| {
                let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
                (n as f64 * lambda.ln() - log_fact).exp()
            })
            .collect();
        Self::from_unnormalized(&w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn get(&self, alpha: usize) -> f64 {
        self.q[alpha]
    }

    pub fn check_matches(&self, family: &ParametricFamily) -> Result<()> {
        if self.len() != family.n_components() {
            return Err(Error::domain(format!(
                "{} mixture weights for a family with {} components",
                self.len(),
                family.n_components()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin(p: f64) -> ParametricFamily {
        let model = ClosureModel::new(2, 1, move |_, _, j| if j == 0 { p } else { 1.0 - p });
        ParametricFamily::new(
            "coin",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.0, 1.0).unwrap(),
            Regularity::C3,
            Arc::new(model),
        )
        .unwrap()
    }

    #[test]
    fn labels_must_be_distinct() {
        assert!(Alphabet::new(vec!["a".into(), "a".into()]).is_err());
        assert!(Alphabet::new(vec!["a".into()]).is_err());
        assert!(ComponentSet::new(vec![]).is_err());
        assert!(ComponentSet::new(vec!["g".into()]).is_ok());
    }

    #[test]
    fn box_needs_interior() {
        assert!(ParameterBox::interval(1.0, 1.0).is_err());
        assert!(ParameterBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = ParameterBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(b.contains(&[0.0, 1.0]));
        assert!(!b.contains_interior(&[0.0, 0.5]));
        assert!(b.check(&[2.0, 0.0]).is_err());
        assert!(b.check(&[0.5]).is_err());
    }

    #[test]
    fn rejects_unnormalized_and_boundary_probabilities() {
        let bad_sum = ClosureModel::new(2, 1, |_, _, _| 0.6);
        let err = ParametricFamily::new(
            "bad",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.0, 1.0).unwrap(),
            Regularity::C1,
            Arc::new(bad_sum),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Construction(_)));

        // p_θ(0) = θ touches 0 at the lower end of the box
        let touching = ClosureModel::new(2, 1, |t: &[f64], _, j| if j == 0 { t[0] } else { 1.0 - t[0] });
        assert!(ParametricFamily::new(
            "touch",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.0, 0.5).unwrap(),
            Regularity::C1,
            Arc::new(touching),
        )
        .is_err());
    }

    #[test]
    fn rejects_wrong_analytic_gradient() {
        let model = ClosureModel::new(2, 1, |t: &[f64], _, j| if j == 0 { t[0] } else { 1.0 - t[0] })
            .with_grad(|_, _, j, out| out[0] = if j == 0 { 2.0 } else { -2.0 });
        assert!(ParametricFamily::new(
            "wrong-grad",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.1, 0.9).unwrap(),
            Regularity::C1,
            Arc::new(model),
        )
        .is_err());
    }

    #[test]
    fn finite_differences_near_the_boundary_stay_inside() {
        let model = ClosureModel::new(2, 1, |t: &[f64], _, j| {
            assert!((0.1..=0.9).contains(&t[0]), "evaluated outside the box at {}", t[0]);
            let p = t[0] * t[0];
            if j == 0 { p } else { 1.0 - p }
        });
        let fam = ParametricFamily::new(
            "square",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.1, 0.9).unwrap(),
            Regularity::C1,
            Arc::new(model),
        )
        .unwrap();
        for &t in &[0.1, 0.5, 0.9] {
            let (g, src) = fam.prob_grads(&[t], 0).unwrap();
            assert_eq!(src, DerivativeSource::FiniteDifference);
            assert!((g[0] - 2.0 * t).abs() < 1e-8, "t = {t}: {}", g[0]);
        }
    }

    #[test]
    fn continuous_family_has_no_derivatives() {
        let model = ClosureModel::new(2, 1, |_, _, _| 0.5);
        let fam = ParametricFamily::new(
            "flat",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.0, 1.0).unwrap(),
            Regularity::Continuous,
            Arc::new(model),
        )
        .unwrap();
        assert!(matches!(fam.scores(&[0.5], 0), Err(Error::Capability(_))));
    }

    #[test]
    fn prob_lookups_are_checked() {
        let fam = coin(0.3);
        assert!((fam.prob(&[0.5], 0, 0).unwrap() - 0.3).abs() < 1e-15);
        assert!(fam.prob(&[0.5], 1, 0).is_err());
        assert!(fam.prob(&[0.5], 0, 2).is_err());
        assert!(fam.prob(&[1.5], 0, 0).is_err());
    }

    #[test]
    fn mixture_weights() {
        assert!(MixtureWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(MixtureWeights::new(vec![1.0, 0.0]).is_err());
        assert!(MixtureWeights::new(vec![0.5, 0.6]).is_err());
        let q = MixtureWeights::poisson_like(3.46, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let direct: Vec<f64> = (1..=8u32)
            .map(|n| 3.46f64.powi(n as i32) / (1..=n).product::<u32>() as f64)
            .collect();
        let s: f64 = direct.iter().sum();
        for (a, w) in q.as_slice().iter().enumerate() {
            assert!((w - direct[a] / s).abs() < 1e-14);
        }
        let mode = (0..8).max_by(|&a, &b| q.get(a).total_cmp(&q.get(b))).unwrap();
        assert_eq!(mode, 2, "3.46³/3! is the largest weight");
    }

    #[test]
    fn halton_points_are_in_unit_cube_and_distinct() {
        let pts = halton(3, 50);
        for (i, p) in pts.iter().enumerate() {
            assert!(p.iter().all(|x| (0.0..1.0).contains(x)));
            assert!(!pts[..i].contains(p));
        }
    }
}
