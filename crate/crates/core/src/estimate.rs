//! Mixture and per-component log-likelihoods, their limit function, and
//! maximum-likelihood estimation over a box.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{DerivativeSource, MixtureWeights, ParameterBox, ParametricFamily, Regularity};
use crate::info::{fisher_information, kl_divergence, shannon_entropy, InfoMatrix};
use crate::optimize::{maximize_box, maximize_interval, Maximum, OptimizerSettings, TracePoint};
use crate::simulate::CountVector;

/// `ln Σ exp(x_i)` with the maximum factored out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Normalized mixture log-likelihood at one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    /// `ℓ_n(θ) = (1/n) ln Σ_α q(α) ℙ_{θ|α}(ω_1…ω_n)`.
    pub value: f64,
    pub n: u64,
    pub theta: Vec<f64>,
    /// `ln q(α) + Σ_j N_n(j) ln p_θ(j|α)`.
    pub per_component: Vec<f64>,
}

/// Evaluates log-likelihood terms from counts only, reusing buffers.
pub(crate) struct CountsEvaluator<'a> {
    fam: &'a ParametricFamily,
    log_q: Vec<f64>,
    nonzero: Vec<(usize, f64)>,
    n: f64,
    buf: Vec<f64>,
}

impl<'a> CountsEvaluator<'a> {
    pub(crate) fn new(fam: &'a ParametricFamily, q: Option<&MixtureWeights>, counts: &CountVector) -> Result<Self> {
        if counts.n == 0 {
            return Err(Error::domain("log-likelihood needs at least one observation"));
        }
        if counts.counts.len() != fam.alphabet_size() {
            return Err(Error::domain(format!(
                "count vector has {} entries, alphabet has {}",
                counts.counts.len(),
                fam.alphabet_size()
            )));
        }
        let log_q = match q {
            Some(q) => {
                q.check_matches(fam)?;
                q.as_slice().iter().map(|w| w.ln()).collect()
            }
            None => vec![0.0; fam.n_components()],
        };
        let nonzero = counts
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(j, c)| (j, *c as f64))
            .collect();
        Ok(Self { fam, log_q, nonzero, n: counts.n as f64, buf: vec![0.0; fam.alphabet_size()] })
    }

    /// `Σ_j N(j) ln p_θ(j|α)`.
    pub(crate) fn component_log(&mut self, theta: &[f64], alpha: usize) -> f64 {
        self.fam.probs_into(theta, alpha, &mut self.buf);
        self.nonzero.iter().map(|&(j, c)| c * self.buf[j].ln()).sum()
    }

    pub(crate) fn per_component(&mut self, theta: &[f64]) -> Vec<f64> {
        (0..self.fam.n_components())
            .map(|a| self.log_q[a] + self.component_log(theta, a))
            .collect()
    }

    /// `n ℓ_n(θ)`.
    pub(crate) fn log_mixture(&mut self, theta: &[f64]) -> f64 {
        let terms = self.per_component(theta);
        log_sum_exp(&terms)
    }

    pub(crate) fn mixture(&mut self, theta: &[f64]) -> f64 {
        self.log_mixture(theta) / self.n
    }

    pub(crate) fn component(&mut self, theta: &[f64], gamma: usize) -> f64 {
        self.component_log(theta, gamma) / self.n
    }

    /// `∇ℓ_n` for the mixture (`gamma = None`) or one component.
    fn gradient(&mut self, theta: &[f64], gamma: Option<usize>) -> Vec<f64> {
        let dim = self.fam.dim();
        let weights = match gamma {
            Some(g) => {
                let mut w = vec![0.0; self.fam.n_components()];
                w[g] = 1.0;
                w
            }
            None => softmax(&self.per_component(theta)),
        };
        let mut grad = vec![0.0; dim];
        for (alpha, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let (scores, _) = self
                .fam
                .scores(theta, alpha)
                .unwrap_or_else(|_| (vec![f64::NAN; self.fam.alphabet_size() * dim], DerivativeSource::Analytic));
            for &(j, c) in &self.nonzero {
                for k in 0..dim {
                    grad[k] += w * c * scores[j * dim + k];
                }
            }
        }
        grad.iter_mut().for_each(|g| *g /= self.n);
        grad
    }
}

/// `ℓ_n(θ)` from counts, with the per-component log terms.
pub fn loglik(fam: &ParametricFamily, q: &MixtureWeights, counts: &CountVector, theta: &[f64]) -> Result<LogLikelihood> {
    fam.domain().check(theta)?;
    let mut ev = CountsEvaluator::new(fam, Some(q), counts)?;
    let per_component = ev.per_component(theta);
    let value = log_sum_exp(&per_component) / counts.n as f64;
    Ok(LogLikelihood { value, n: counts.n, theta: theta.to_vec(), per_component })
}

/// `ℓ_n^γ(θ) = (1/n) Σ_j N_n(j) ln p_θ(j|γ)`.
pub fn loglik_component(fam: &ParametricFamily, counts: &CountVector, theta: &[f64], gamma: usize) -> Result<f64> {
    fam.check_args(theta, gamma)?;
    let mut ev = CountsEvaluator::new(fam, None, counts)?;
    Ok(ev.component(theta, gamma))
}

/// `ℓ_{θ*,γ}(θ) = -S_{θ*}(γ) - min_α S_{θ*|θ}(γ|α)`.
pub fn limit_loglik(fam: &ParametricFamily, theta_star: &[f64], gamma: usize, theta: &[f64]) -> Result<f64> {
    let entropy = shannon_entropy(fam, theta_star, gamma)?;
    let mut min_kl = f64::INFINITY;
    for alpha in 0..fam.n_components() {
        min_kl = min_kl.min(kl_divergence(fam, theta_star, theta, gamma, alpha)?);
    }
    Ok(-entropy - min_kl)
}

/// Given `(1/n) ln a_n` and `(1/n) ln b_n` tabulated on a grid, return
/// `(1/n) ln(a_n + b_n)` on the same grid.
pub fn logsum_of_sequences(log_a: &[f64], log_b: &[f64], n: usize) -> Result<Vec<f64>> {
    if log_a.len() != log_b.len() || n == 0 {
        return Err(Error::domain("sequences must have equal length and n ≥ 1"));
    }
    log_a
        .iter()
        .zip(log_b)
        .map(|(&la, &lb)| {
            if !(la.is_finite() && lb.is_finite()) {
                return Err(Error::domain("inputs must be logarithms of strictly positive values"));
            }
            let m = la.max(lb);
            let nf = n as f64;
            Ok(m + (-(nf * (la - lb).abs())).exp().ln_1p() / nf)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Restrict the search to this sub-box of the family domain.
    pub search_box: Option<ParameterBox>,
    pub per_component: bool,
    pub with_fisher: bool,
    pub optimizer: OptimizerSettings,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { search_box: None, per_component: true, with_fisher: true, optimizer: OptimizerSettings::default() }
    }
}

impl MleOptions {
    /// Only the mixture estimate, no trace.
    pub fn fast(search_box: Option<ParameterBox>) -> Self {
        Self {
            search_box,
            per_component: false,
            with_fisher: false,
            optimizer: OptimizerSettings { record_trace: false, ..OptimizerSettings::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub theta_hat: Vec<f64>,
    /// Row γ: maximizer of `ℓ_n^γ`.
    pub theta_hat_per_component: Vec<Vec<f64>>,
    pub loglik_at_max: f64,
    pub n: u64,
    pub converged: bool,
    pub at_boundary: bool,
    pub tie: bool,
    pub evaluations: usize,
    pub derivatives: DerivativeSource,
    pub search_box: ParameterBox,
    pub optimizer_trace: Vec<TracePoint>,
    pub fisher_at_hat: Vec<InfoMatrix>,
    /// `q(α) ℙ_{θ̂|α} / ℙ_{θ̂}`.
    pub posterior_at_hat: Vec<f64>,
}

impl EstimationReport {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.theta_hat.len();
        let mut header: Vec<String> = (0..dim).map(|k| format!("theta_{k}")).collect();
        header.push("loglik".into());
        w.write_record(&header)?;
        for p in &self.optimizer_trace {
            let mut row: Vec<String> = p.theta.iter().map(|x| crate::report::fmt_real(*x)).collect();
            row.push(crate::report::fmt_real(p.value));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn resolve_box(fam: &ParametricFamily, opts: &MleOptions) -> Result<ParameterBox> {
    match &opts.search_box {
        Some(b) => {
            if !fam.domain().contains_box(b) {
                return Err(Error::domain("search box must lie inside the family domain"));
            }
            Ok(b.clone())
        }
        None => Ok(fam.domain().clone()),
    }
}

fn maximize(
    ev: &mut CountsEvaluator<'_>,
    bx: &ParameterBox,
    gamma: Option<usize>,
    settings: &OptimizerSettings,
) -> Maximum {
    let ev = std::cell::RefCell::new(ev);
    let mut f = |x: &[f64]| match gamma {
        Some(g) => ev.borrow_mut().component(x, g),
        None => ev.borrow_mut().mixture(x),
    };
    if bx.dim() == 1 {
        maximize_interval(&mut f, bx, settings)
    } else {
        let mut g = |x: &[f64]| ev.borrow_mut().gradient(x, gamma);
        maximize_box(&mut f, &mut g, bx, settings)
    }
}

/// Maximum-likelihood estimate of `θ` from counts.
pub fn mle(fam: &ParametricFamily, q: &MixtureWeights, counts: &CountVector, opts: &MleOptions) -> Result<EstimationReport> {
    let bx = resolve_box(fam, opts)?;
    if bx.dim() > 1 && fam.regularity() < Regularity::C1 {
        return Err(Error::Capability("gradient ascent needs a C1 family".into()));
    }
    let mut ev = CountsEvaluator::new(fam, Some(q), counts)?;
    let best = maximize(&mut ev, &bx, None, &opts.optimizer);

    let mut per_component = Vec::new();
    if opts.per_component {
        let settings = OptimizerSettings { record_trace: false, ..opts.optimizer.clone() };
        for gamma in 0..fam.n_components() {
            per_component.push(maximize(&mut ev, &bx, Some(gamma), &settings).theta);
        }
    }
    let posterior_at_hat = softmax(&ev.per_component(&best.theta));
    let fisher_at_hat = if opts.with_fisher && fam.regularity() >= Regularity::C1 {
        (0..fam.n_components())
            .map(|a| fisher_information(fam, &best.theta, a))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(EstimationReport {
        loglik_at_max: best.value,
        n: counts.n,
        converged: best.converged,
        at_boundary: best.at_boundary,
        tie: best.tie,
        evaluations: best.evaluations,
        derivatives: fam.derivative_source(),
        search_box: bx,
        optimizer_trace: best.trace,
        theta_hat: best.theta,
        theta_hat_per_component: per_component,
        fisher_at_hat,
        posterior_at_hat,
    })
}

/// Maximizer of the single-component log-likelihood `ℓ_n^γ`.
pub fn mle_component(
    fam: &ParametricFamily,
    counts: &CountVector,
    gamma: usize,
    opts: &MleOptions,
) -> Result<Vec<f64>> {
    let bx = resolve_box(fam, opts)?;
    if gamma >= fam.n_components() {
        return Err(Error::domain(format!("component {gamma} out of range")));
    }
    let mut ev = CountsEvaluator::new(fam, None, counts)?;
    Ok(maximize(&mut ev, &bx, Some(gamma), &opts.optimizer).theta)
}
