//! Information functionals of a family: entropy, Kullback–Leibler
//! divergence, Fisher information, and the grid identifiability check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{DerivativeSource, ParametricFamily};
use crate::linalg::symmetric_eigenvalues;

/// Default margin below which two laws are reported as indistinguishable.
pub const ID_TOL: f64 = 1e-9;

/// `S_θ(α) = -Σ_j p ln p`.
pub fn shannon_entropy(fam: &ParametricFamily, theta: &[f64], alpha: usize) -> Result<f64> {
    let p = fam.probs(theta, alpha)?;
    Ok(-p.iter().map(|x| x * x.ln()).sum::<f64>())
}

/// `S_{θ|θ'}(α|β) = Σ_j p_θ(j|α) (ln p_θ(j|α) - ln p_{θ'}(j|β))`.
pub fn kl_divergence(
    fam: &ParametricFamily,
    theta: &[f64],
    theta2: &[f64],
    alpha: usize,
    beta: usize,
) -> Result<f64> {
    let p = fam.probs(theta, alpha)?;
    let r = fam.probs(theta2, beta)?;
    Ok(kl_of(&p, &r))
}

pub(crate) fn kl_of(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).map(|(a, b)| a * (a.ln() - b.ln())).sum::<f64>().max(0.0)
}

/// Matrix `S_θ(α|γ)` (row α, column γ). Not symmetric in general.
pub fn kl_matrix(fam: &ParametricFamily, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    let table = fam.prob_table(theta)?;
    Ok(table
        .iter()
        .map(|p| table.iter().map(|r| kl_of(p, r)).collect())
        .collect())
}

/// Per-component Fisher information `I_θ(α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoMatrix {
    pub dim: usize,
    /// Row-major `D × D`.
    pub m: Vec<f64>,
    pub component: usize,
    pub theta: Vec<f64>,
    pub derivatives: DerivativeSource,
}

impl InfoMatrix {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.m[k * self.dim + l]
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.dim {
            for l in 0..self.dim {
                worst = worst.max((self.get(k, l) - self.get(l, k)).abs());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.m, self.dim)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// `hᵀ I h`.
    pub fn quadratic_form(&self, h: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            for l in 0..self.dim {
                s += h[k] * self.get(k, l) * h[l];
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    /// Inverse through Gauss–Jordan with partial pivoting; refuses when the
    /// smallest eigenvalue is not positive relative to the largest.
    pub fn inverse(&self) -> Result<Vec<f64>> {
        let eig = self.eigenvalues()?;
        let max = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(eig[0] > 1e-12 * max.max(1e-300)) {
            return Err(Error::Numerical(format!(
                "Fisher information of component {} is singular at θ = {:?} (eigenvalues {:?})",
                self.component, self.theta, eig
            )));
        }
        let n = self.dim;
        let mut a = self.m.clone();
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            inv[i * n + i] = 1.0;
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            if piv != col {
                for k in 0..n {
                    a.swap(piv * n + k, col * n + k);
                    inv.swap(piv * n + k, col * n + k);
                }
            }
            let d = a[col * n + col];
            for k in 0..n {
                a[col * n + k] /= d;
                inv[col * n + k] /= d;
            }
            for i in 0..n {
                if i != col {
                    let f = a[i * n + col];
                    for k in 0..n {
                        a[i * n + k] -= f * a[col * n + k];
                        inv[i * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
        Ok(inv)
    }

    /// `tr I⁻¹`.
    pub fn inverse_trace(&self) -> Result<f64> {
        let inv = self.inverse()?;
        Ok((0..self.dim).map(|k| inv[k * self.dim + k]).sum())
    }
}

/// `(I_θ(α))_{kl} = Σ_j p ∂_k ln p ∂_l ln p`.
pub fn fisher_information(fam: &ParametricFamily, theta: &[f64], alpha: usize) -> Result<InfoMatrix> {
    let (scores, derivatives) = fam.scores(theta, alpha)?;
    let p = fam.probs(theta, alpha)?;
    let dim = fam.dim();
    let mut m = vec![0.0; dim * dim];
    for (j, pj) in p.iter().enumerate() {
        let s = &scores[j * dim..(j + 1) * dim];
        for k in 0..dim {
            for l in 0..dim {
                m[k * dim + l] += pj * s[k] * s[l];
            }
        }
    }
    // exact symmetry
    for k in 0..dim {
        for l in (k + 1)..dim {
            let avg = 0.5 * (m[k * dim + l] + m[l * dim + k]);
            m[k * dim + l] = avg;
            m[l * dim + k] = avg;
        }
    }
    Ok(InfoMatrix { dim, m, component: alpha, theta: theta.to_vec(), derivatives })
}

/// Fisher information of every component at `theta`.
pub fn fisher_all(fam: &ParametricFamily, theta: &[f64]) -> Result<Vec<InfoMatrix>> {
    (0..fam.n_components()).map(|a| fisher_information(fam, theta, a)).collect()
}

/// A pair of (component, grid point) whose laws nearly coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPair {
    pub alpha: usize,
    pub theta: Vec<f64>,
    pub beta: usize,
    pub theta2: Vec<f64>,
    /// `max_j |p_θ(j|α) - p_θ'(j|β)|`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub grid_points: usize,
    pub pairs_checked: usize,
    pub tolerance: f64,
    /// Smallest margin over all distinct pairs.
    pub min_margin: f64,
    pub flagged: Vec<FlaggedPair>,
}

impl IdentifiabilityReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Compare every distinct pair `(α, θ) ≠ (β, θ')` over components × grid.
/// A pass is evidence on the grid only.
pub fn check_identifiability(
    fam: &ParametricFamily,
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<IdentifiabilityReport> {
    if grid.is_empty() {
        return Err(Error::domain("identifiability grid is empty"));
    }
    let mut laws = Vec::with_capacity(grid.len() * fam.n_components());
    for (gi, theta) in grid.iter().enumerate() {
        for alpha in 0..fam.n_components() {
            laws.push((gi, alpha, fam.probs(theta, alpha)?));
        }
    }
    let mut min_margin = f64::INFINITY;
    let mut flagged = Vec::new();
    let mut pairs = 0usize;
    for (i, (gi, alpha, p)) in laws.iter().enumerate() {
        for (gk, beta, r) in &laws[i + 1..] {
            pairs += 1;
            let margin = p.iter().zip(r).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            min_margin = min_margin.min(margin);
            if margin < tol {
                flagged.push(FlaggedPair {
                    alpha: *alpha,
                    theta: grid[*gi].clone(),
                    beta: *beta,
                    theta2: grid[*gk].clone(),
                    margin,
                });
            }
        }
    }
    Ok(IdentifiabilityReport {
        grid_points: grid.len(),
        pairs_checked: pairs,
        tolerance: tol,
        min_margin,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Alphabet, ClosureModel, ComponentSet, ParameterBox, Regularity};
    use std::sync::Arc;

    fn two_point(ps: Vec<f64>) -> ParametricFamily {
        let d = ps.len();
        let model = ClosureModel::new(2, 1, move |_, a, j| if j == 0 { ps[a] } else { 1.0 - ps[a] })
            .with_grad(|_, _, _, out| out[0] = 0.0);
        ParametricFamily::new(
            "fixed",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(d).unwrap(),
            ParameterBox::interval(0.0, 1.0).unwrap(),
            Regularity::C3,
            Arc::new(model),
        )
        .unwrap()
    }

    fn bernoulli() -> ParametricFamily {
        let model = ClosureModel::new(2, 1, |t: &[f64], _, j| if j == 0 { t[0] } else { 1.0 - t[0] })
            .with_grad(|_, _, j, out| out[0] = if j == 0 { 1.0 } else { -1.0 });
        ParametricFamily::new(
            "bernoulli",
            Alphabet::indexed(2).unwrap(),
            ComponentSet::indexed(1).unwrap(),
            ParameterBox::interval(0.1, 0.9).unwrap(),
            Regularity::C3,
            Arc::new(model),
        )
        .unwrap()
    }

    #[test]
    fn entropy_of_fair_coin() {
        let fam = two_point(vec![0.5]);
        let s = shannon_entropy(&fam, &[0.3], 0).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_two_outcome_hand_value() {
        let fam = two_point(vec![0.6, 0.5]);
        let kl = kl_divergence(&fam, &[0.5], &[0.5], 0, 1).unwrap();
        let oracle = 0.6 * (1.2f64).ln() + 0.4 * (0.8f64).ln();
        assert!((kl - oracle).abs() < 1e-15);
        assert!((kl - 0.020136).abs() < 1e-6);
        assert_eq!(kl_divergence(&fam, &[0.5], &[0.5], 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn kl_domain_errors() {
        let fam = bernoulli();
        assert!(matches!(kl_divergence(&fam, &[0.05], &[0.5], 0, 0), Err(Error::Domain(_))));
        assert!(matches!(shannon_entropy(&fam, &[0.95], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_family_has_zero_fisher() {
        let fam = two_point(vec![0.3, 0.7]);
        let i = fisher_information(&fam, &[0.4], 1).unwrap();
        assert_eq!(i.m, vec![0.0]);
        assert!(i.inverse().is_err());
    }

    #[test]
    fn bernoulli_fisher_textbook() {
        let fam = bernoulli();
        for &t in &[0.2, 0.5, 0.7] {
            let i = fisher_information(&fam, &[t], 0).unwrap();
            assert!((i.get(0, 0) - 1.0 / (t * (1.0 - t))).abs() < 1e-12);
            assert!((i.inverse().unwrap()[0] - t * (1.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_component_is_flagged() {
        let fam = two_point(vec![0.3, 0.3, 0.6]);
        let rep = check_identifiability(&fam, &[vec![0.5]], ID_TOL).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.flagged.len(), 1);
        assert_eq!((rep.flagged[0].alpha, rep.flagged[0].beta), (0, 1));
        assert_eq!(rep.flagged[0].margin, 0.0);
        assert!(check_identifiability(&fam, &[], ID_TOL).is_err());
    }

    #[test]
    fn kl_matrix_diagonal_is_zero() {
        let fam = two_point(vec![0.2, 0.5, 0.7]);
        let m = kl_matrix(&fam, &[0.5]).unwrap();
        for (a, row) in m.iter().enumerate() {
            assert_eq!(row[a], 0.0);
            for (b, v) in row.iter().enumerate() {
                if a != b {
                    assert!(*v > 0.0);
                }
            }
        }
    }
}
