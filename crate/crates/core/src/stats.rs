//! Goodness-of-fit statistics for spacing samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Kolmogorov–Smirnov distance `sup |F_n - F|` between the empirical CDF of
/// `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS distance of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(d)
}

/// Equal-width histogram normalized as a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples outside `[edges[0], edges[last])`.
    pub outside: u64,
}

impl Histogram {
    /// Densities are `count / (n_total * width)`, so mass outside the range
    /// is accounted for.
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
        if bins == 0 || !(lo < hi) {
            return Err(Error::invalid(format!(
                "histogram needs bins > 0 and lo < hi, got {bins} bins on [{lo}, {hi}]"
            )));
        }
        if samples.is_empty() {
            return Err(Error::invalid("histogram of an empty sample"));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut outside = 0;
        for &x in samples {
            let k = ((x - lo) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            } else {
                outside += 1;
            }
        }
        let norm = samples.len() as f64 * width;
        Ok(Histogram {
            edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
            density: counts.iter().map(|&c| c as f64 / norm).collect(),
            counts,
            outside,
        })
    }

    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Density at `s` as a step function (0 outside the range).
    pub fn step_density(&self, s: f64) -> f64 {
        let k = ((s - self.edges[0]) / self.width()).floor();
        if k < 0.0 {
            return 0.0;
        }
        self.density.get(k as usize).copied().unwrap_or(0.0)
    }

    /// Largest `|density - mean of f over the bin|`, bin means by 16-point
    /// Gauss–Legendre.
    pub fn sup_deviation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let rule = crate::quadrature::gauss_legendre(16).expect("valid order");
        self.edges
            .windows(2)
            .zip(&self.density)
            .map(|(e, d)| {
                let avg = rule.integrate(|t| f(e[0] + t * (e[1] - e[0])));
                (d - avg).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Pearson chi-square on `bins` equal-probability bins defined by the
/// quantile function of the reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
}

impl ChiSquare {
    pub fn per_dof(&self) -> f64 {
        self.statistic / self.dof as f64
    }
}

pub fn chi_square_equiprobable<Q: Fn(f64) -> f64>(
    samples: &[f64],
    quantile: Q,
    bins: usize,
) -> Result<ChiSquare> {
    if bins < 2 || samples.is_empty() {
        return Err(Error::invalid("chi-square needs >= 2 bins and a nonempty sample"));
    }
    let cuts: Vec<f64> = (1..bins).map(|k| quantile(k as f64 / bins as f64)).collect();
    let mut counts = vec![0u64; bins];
    for &x in samples {
        counts[cuts.partition_point(|&c| c <= x)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    Ok(ChiSquare {
        statistic,
        dof: bins - 1,
    })
}

/// Inverse of a continuous increasing CDF on `[0, inf)` by bracketing and
/// bisection to machine precision.
pub fn invert_cdf<F: Fn(f64) -> f64>(cdf: F, p: f64) -> f64 {
    let mut hi = 1.0;
    while cdf(hi) < p && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_quantiles_is_half_step() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn histogram_density_integrates_to_inside_fraction() {
        let xs = [0.1, 0.2, 0.3, 1.5, 7.0];
        let h = Histogram::new(&xs, 0.0, 2.0, 4).unwrap();
        assert_eq!(h.counts, vec![3, 0, 0, 1]);
        assert_eq!(h.outside, 1);
        let mass: f64 = h.density.iter().map(|d| d * h.width()).sum();
        assert!((mass - 0.8).abs() < 1e-15);
        assert_eq!(h.step_density(0.25), 3.0 / (5.0 * 0.5));
        assert_eq!(h.step_density(-1.0), 0.0);
    }

    #[test]
    fn chi_square_of_perfect_sample_is_zero() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let c = chi_square_equiprobable(&xs, |p| p, 10).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.dof, 9);
    }

    #[test]
    fn cdf_inversion() {
        let cdf = |x: f64| 1.0 - (-x).exp();
        let x = invert_cdf(cdf, 0.5);
        assert!((x - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
