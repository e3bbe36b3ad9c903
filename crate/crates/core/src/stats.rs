//! Summary statistics used by the experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linearly interpolated quantile of a sample.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Anderson–Darling normality test with mean and variance estimated from
/// the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    pub statistic: f64,
    /// Critical value at the 1% level, small-sample corrected.
    pub critical_1pct: f64,
    pub passed: bool,
}

/// `None` for fewer than 8 points or a constant sample.
pub fn anderson_darling(xs: &[f64]) -> Option<AndersonDarling> {
    let n = xs.len();
    let sd = variance(xs).sqrt();
    if n < 8 || sd == 0.0 {
        return None;
    }
    let m = mean(xs);
    let mut w: Vec<f64> = xs.iter().map(|x| (x - m) / sd).collect();
    w.sort_by(f64::total_cmp);
    let z = Normal::standard();
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let log_cdf = z.cdf(w[i]).ln();
        let log_sf = z.sf(w[n - 1 - i]).ln();
        s += (2 * i + 1) as f64 / nf * (log_cdf + log_sf);
    }
    let statistic = -nf - s;
    let critical_1pct = 1.092 / (1.0 + 4.0 / nf - 25.0 / (nf * nf));
    Some(AndersonDarling { statistic, critical_1pct, passed: statistic < critical_1pct })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: [f64; 15] =
        [0.31, -1.2, 0.05, 2.1, -0.44, 0.9, -0.03, 1.37, -2.2, 0.6, 0.12, -0.75, 1.05, -0.18, 0.49];

    #[test]
    fn anderson_darling_matches_reference() {
        // reference values from scipy.stats.anderson
        let ad = anderson_darling(&SAMPLE).unwrap();
        assert!((ad.statistic - 0.16717874126160837).abs() < 1e-9, "{}", ad.statistic);
        assert!((ad.critical_1pct - 0.945).abs() < 1e-3);
        assert!(ad.passed);
        let skewed: Vec<f64> = SAMPLE.iter().map(|x| x.exp()).collect();
        let ad = anderson_darling(&skewed).unwrap();
        assert!((ad.statistic - 1.3736499175855208).abs() < 1e-9);
        assert!(!ad.passed);
        assert!(anderson_darling(&[1.0; 20]).is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        assert!((quantile(&SAMPLE, 0.1) - -1.02).abs() < 1e-12);
        assert!((median(&SAMPLE) - 0.12).abs() < 1e-15);
        assert!((quantile(&SAMPLE, 0.9) - 1.242).abs() < 1e-12);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        assert!((slope(&x, &y) + 0.5).abs() < 1e-15);
    }
}
