//! Bounded maximization: scan + golden-section refinement on intervals,
//! multi-start projected gradient ascent on boxes.

use serde::{Deserialize, Serialize};

use crate::family::{halton, ParameterBox};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// Objective values closer than this are considered tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Coarse scan size for intervals.
    pub scan_points: usize,
    /// Bracket width at which golden-section search stops.
    pub x_tol: f64,
    /// Projected-gradient norm (unit-cube coordinates) at which ascent stops.
    pub grad_tol: f64,
    /// Number of low-discrepancy starts in dimension > 1.
    pub starts: usize,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { scan_points: 64, x_tol: 1e-8, grad_tol: 1e-7, starts: 8, max_iter: 2000, record_trace: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    /// Another local maximum matched the best value within `TIE_TOL`.
    pub tie: bool,
    pub at_boundary: bool,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
}

struct Recorder<'a, F> {
    f: &'a mut F,
    trace: Vec<TracePoint>,
    record: bool,
    evals: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Recorder<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        self.evals += 1;
        if v.is_finite() && self.best.as_ref().is_none_or(|b| v > b.1) {
            self.best = Some((x.to_vec(), v));
        }
        if self.record {
            self.trace.push(TracePoint { theta: x.to_vec(), value: v });
        }
        v
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn boundary_flag(bx: &ParameterBox, theta: &[f64]) -> bool {
    (0..bx.dim()).any(|k| {
        let tol = 1e-6 * bx.width(k);
        theta[k] - bx.lower()[k] <= tol || bx.upper()[k] - theta[k] <= tol
    })
}

/// Pick the best of several local maxima with the lexicographic tie rule.
fn select(candidates: Vec<(Vec<f64>, f64, bool)>, x_sep: f64) -> (Vec<f64>, f64, bool, bool) {
    let best_value = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<&(Vec<f64>, f64, bool)> =
        candidates.iter().filter(|c| best_value - c.1 <= TIE_TOL).collect();
    tied.sort_by(|a, b| {
        if lex_less(&a.0, &b.0) {
            std::cmp::Ordering::Less
        } else if lex_less(&b.0, &a.0) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let chosen = tied[0];
    let distinct = tied.iter().any(|c| {
        c.0.iter().zip(&chosen.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > x_sep
    });
    (chosen.0.clone(), chosen.1, chosen.2, distinct)
}

/// Golden-section maximization on `[a, b]`; returns the best point seen.
fn golden_section<F: FnMut(&[f64]) -> f64>(
    rec: &mut Recorder<'_, F>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, bool) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = rec.eval(&[c]);
    let mut fd = rec.eval(&[d]);
    let mut iter = 0;
    while (b - a) > tol && iter < max_iter {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = rec.eval(&[c]);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = rec.eval(&[d]);
        }
        iter += 1;
    }
    let converged = (b - a) <= tol;
    let m = 0.5 * (a + b);
    let fm = rec.eval(&[m]);
    let mut best = (m, fm);
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    (best.0, best.1, converged)
}

/// Maximize `f` on an interval: scan `scan_points` equispaced points, then
/// refine every local maximum of the scan by golden-section search.
pub fn maximize_interval<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    bx: &ParameterBox,
    settings: &OptimizerSettings,
) -> Maximum {
    assert_eq!(bx.dim(), 1);
    let mut rec = Recorder { f, trace: Vec::new(), record: settings.record_trace, evals: 0, best: None };
    let grid = bx.linspace(settings.scan_points.max(3));
    let xs: Vec<f64> = grid.iter().map(|p| p[0]).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| rec.eval(&[x])).collect();
    let last = xs.len() - 1;
    let mut candidates = Vec::new();
    for i in 0..=last {
        let left_ok = i == 0 || vals[i] >= vals[i - 1];
        let right_ok = i == last || vals[i] >= vals[i + 1];
        if !(left_ok && right_ok) || !vals[i].is_finite() {
            continue;
        }
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(last)];
        let (x, v, conv) = golden_section(&mut rec, a, b, settings.x_tol, settings.max_iter);
        // scan point itself may beat the refined interior point at a boundary
        if vals[i] > v {
            candidates.push((vec![xs[i]], vals[i], conv));
        } else {
            candidates.push((vec![x], v, conv));
        }
    }
    if candidates.is_empty() {
        // all values non-finite
        let i = (0..=last).find(|&i| !vals[i].is_nan()).unwrap_or(0);
        candidates.push((vec![xs[i]], vals[i], false));
    }
    let sep = 10.0 * settings.x_tol.max(bx.width(0) * 1e-9);
    let (mut theta, mut value, converged, tie) = select(candidates, sep);
    if let Some((x, v)) = rec.best.take() {
        if v > value + TIE_TOL {
            theta = x;
            value = v;
        }
    }
    Maximum {
        at_boundary: boundary_flag(bx, &theta),
        theta,
        value,
        converged,
        tie,
        evaluations: rec.evals,
        trace: rec.trace,
    }
}

/// Multi-start projected gradient ascent with Armijo backtracking, in
/// coordinates scaled to the unit cube.
pub fn maximize_box<F, G>(f: &mut F, grad: &mut G, bx: &ParameterBox, settings: &OptimizerSettings) -> Maximum
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let dim = bx.dim();
    let widths: Vec<f64> = (0..dim).map(|k| bx.width(k)).collect();
    let mut rec = Recorder { f, trace: Vec::new(), record: settings.record_trace, evals: 0, best: None };
    let mut candidates = Vec::new();
    let starts = halton(dim, settings.starts.max(1));
    for u0 in starts {
        let mut x = bx.from_unit(&u0);
        let mut fx = rec.eval(&x);
        let mut step = 0.1;
        let mut converged = false;
        for _ in 0..settings.max_iter {
            let g = grad(&x);
            // gradient in unit-cube coordinates
            let gu: Vec<f64> = g.iter().zip(&widths).map(|(gi, w)| gi * w).collect();
            let mut probe: Vec<f64> = (0..dim).map(|k| x[k] + gu[k] * widths[k]).collect();
            bx.project(&mut probe);
            let pg_norm = (0..dim)
                .map(|k| ((probe[k] - x[k]) / widths[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            if pg_norm < settings.grad_tol {
                converged = true;
                break;
            }
            let mut accepted = false;
            let mut t = (step * 2.0_f64).min(1e3);
            while t > 1e-16 {
                let mut cand: Vec<f64> = (0..dim).map(|k| x[k] + t * gu[k] * widths[k]).collect();
                bx.project(&mut cand);
                let decrease: f64 = (0..dim).map(|k| g[k] * (cand[k] - x[k])).sum();
                let fc = rec.eval(&cand);
                if fc >= fx + 1e-4 * decrease && fc.is_finite() {
                    let moved = (0..dim).map(|k| ((cand[k] - x[k]) / widths[k]).abs()).fold(0.0, f64::max);
                    x = cand;
                    fx = fc;
                    step = t;
                    accepted = true;
                    if moved < 1e-15 {
                        converged = true;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted || converged {
                // no ascent step possible: stationary up to rounding
                converged = converged || !accepted;
                break;
            }
        }
        candidates.push((x, fx, converged));
    }
    let (mut theta, mut value, _, tie) = select(candidates.clone(), 1e-6);
    let converged = candidates.iter().find(|c| c.0 == theta).map(|c| c.2).unwrap_or(false);
    if let Some((x, v)) = rec.best.take() {
        if v > value + TIE_TOL {
            theta = x;
            value = v;
        }
    }
    Maximum {
        at_boundary: boundary_flag(bx, &theta),
        theta,
        value,
        converged,
        tie,
        evaluations: rec.evals,
        trace: rec.trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_maximum() {
        let bx = ParameterBox::interval(0.0, 2.0).unwrap();
        let mut f = |x: &[f64]| -(x[0] - 0.7312).powi(2);
        let m = maximize_interval(&mut f, &bx, &OptimizerSettings::default());
        assert!((m.theta[0] - 0.7312).abs() < 1e-8);
        assert!(m.converged && !m.tie && !m.at_boundary);
        assert!(m.trace.iter().all(|p| p.value <= m.value));
    }

    #[test]
    fn multimodal_picks_global() {
        let bx = ParameterBox::interval(0.0, 10.0).unwrap();
        let mut f = |x: &[f64]| (x[0]).sin() + 0.1 * x[0];
        let m = maximize_interval(&mut f, &bx, &OptimizerSettings::default());
        // maxima near π/2 + 2πk, shifted by the slope; global one near 7.95
        let x = m.theta[0];
        assert!((x.cos() + 0.1).abs() < 1e-7 && x > 7.0, "{x}");
    }

    #[test]
    fn boundary_maximum_flagged() {
        let bx = ParameterBox::interval(0.0, 1.0).unwrap();
        let mut f = |x: &[f64]| x[0];
        let m = maximize_interval(&mut f, &bx, &OptimizerSettings::default());
        assert_eq!(m.theta[0], 1.0);
        assert!(m.at_boundary);
    }

    #[test]
    fn symmetric_maxima_tie_to_smaller() {
        let bx = ParameterBox::interval(-1.0, 1.0).unwrap();
        let mut f = |x: &[f64]| -(x[0] * x[0] - 0.25).powi(2);
        let m = maximize_interval(&mut f, &bx, &OptimizerSettings::default());
        assert!((m.theta[0] + 0.5).abs() < 1e-6, "{:?}", m.theta);
        assert!(m.tie);
    }

    #[test]
    fn box_ascent_on_quadratic() {
        let bx = ParameterBox::new(vec![0.0, 0.0], vec![1.0, 10.0]).unwrap();
        let target = [0.3, 7.0];
        let mut f = |x: &[f64]| -(x[0] - target[0]).powi(2) - 0.01 * (x[1] - target[1]).powi(2);
        let mut g = |x: &[f64]| vec![-2.0 * (x[0] - target[0]), -0.02 * (x[1] - target[1])];
        let m = maximize_box(&mut f, &mut g, &bx, &OptimizerSettings::default());
        assert!(m.converged);
        assert!((m.theta[0] - 0.3).abs() < 1e-6 && (m.theta[1] - 7.0).abs() < 1e-5, "{:?}", m.theta);
    }

    #[test]
    fn box_ascent_projects_onto_bounds() {
        let bx = ParameterBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut f = |x: &[f64]| x[0] + x[1];
        let mut g = |_: &[f64]| vec![1.0, 1.0];
        let m = maximize_box(&mut f, &mut g, &bx, &OptimizerSettings::default());
        assert_eq!(m.theta, vec![1.0, 1.0]);
        assert!(m.at_boundary && m.converged);
    }
}
