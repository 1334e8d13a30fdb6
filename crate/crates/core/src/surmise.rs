//! Wigner-surmised spacing densities from 2x2 matrices.
//!
//! Pure classes use the textbook closed forms. For the GOE-GUE crossover
//! `H = H1 + lambda H2` (real symmetric plus complex Hermitian, unit-variance
//! Gaussian measures) the raw spacing is the length of a centred Gaussian
//! vector with variances `(2A, 2A, 2 lambda^2)`, `A = 1 + lambda^2`.
//! Integrating over directions gives
//!
//! ```text
//! p(r) = r / (2 sqrt A) * exp(-r^2 / 4A) * erf(r / (2 lambda sqrt A))
//! ```
//!
//! which is already normalized; the unit-mean density is `mu p(mu s)` with
//! `mu` the raw mean spacing. Note `p(r) ~ r^2` for `r << lambda`: repulsion
//! is quadratic at the very smallest spacings for any `lambda > 0` and looks
//! linear only on scales above `lambda`.

use std::f64::consts::{PI, SQRT_2};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_range;
use crate::rng::{domain_seed, substream};
use crate::special::erf;
use crate::stats::mean_and_std_error;

fn check_beta(beta: u8) -> Result<()> {
    if matches!(beta, 1 | 2 | 4) {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta must be 1, 2 or 4, got {beta}")))
    }
}

/// Unit-mean surmise for a pure class.
pub fn wigner_surmise_pure(beta: u8, s: f64) -> Result<f64> {
    check_beta(beta)?;
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(match beta {
        1 => 0.5 * PI * s * (-0.25 * PI * s * s).exp(),
        2 => 32.0 / (PI * PI) * s * s * (-4.0 * s * s / PI).exp(),
        _ => {
            let b = 64.0 / (9.0 * PI);
            2f64.powi(18) / (3f64.powi(6) * PI.powi(3)) * s.powi(4) * (-b * s * s).exp()
        }
    })
}

/// Cumulative distribution of [`wigner_surmise_pure`].
pub fn wigner_surmise_pure_cdf(beta: u8, s: f64) -> Result<f64> {
    check_beta(beta)?;
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(match beta {
        1 => -(-0.25 * PI * s * s).exp_m1(),
        2 => erf(2.0 * s / PI.sqrt()) - 4.0 * s / PI * (-4.0 * s * s / PI).exp(),
        _ => {
            let b = 64.0 / (9.0 * PI);
            let norm = 2f64.powi(18) / (3f64.powi(6) * PI.powi(3));
            let e = (-b * s * s).exp();
            norm * (3.0 * PI.sqrt() / (8.0 * b.powf(2.5)) * erf(b.sqrt() * s)
                - e * (s.powi(3) / (2.0 * b) + 3.0 * s / (4.0 * b * b)))
        }
    })
}

/// Constants of the raw crossover density `c0 r exp(-a r^2) erf(b r)`.
#[derive(Debug, Clone, Copy)]
struct Raw {
    a: f64,
    b: f64,
    c0: f64,
}

impl Raw {
    fn new(lambda: f64) -> Raw {
        let big_a = 1.0 + lambda * lambda;
        Raw {
            a: 0.25 / big_a,
            b: 0.5 / (lambda * big_a.sqrt()),
            c0: 0.5 / big_a.sqrt(),
        }
    }

    fn density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.c0 * r * (-self.a * r * r).exp() * erf(self.b * r)
    }

    fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let Raw { a, b, c0 } = *self;
        let k = (a + b * b).sqrt();
        // b / k written to stay finite as b -> inf
        let ratio = 1.0 / (a / (b * b) + 1.0).sqrt();
        c0 * (ratio / (2.0 * a) * erf(k * r) - (-a * r * r).exp() * erf(b * r) / (2.0 * a))
    }

    fn mean(&self) -> f64 {
        let Raw { a, b, c0 } = *self;
        let atan = (b / a.sqrt()).atan() / (PI * a).sqrt();
        let tail = 1.0 / (PI.sqrt() * (a / b + b));
        c0 / (2.0 * a) * (atan + tail)
    }
}

fn crossover_lambda(lambda: f64) -> f64 {
    // The 2x2 model depends on lambda only through lambda^2.
    lambda.abs()
}

/// Raw mean spacing of the 2x2 crossover model (`sqrt(pi)` at `lambda = 0`).
pub fn crossover_raw_mean(lambda: f64) -> f64 {
    let lambda = crossover_lambda(lambda);
    if lambda == 0.0 {
        return PI.sqrt();
    }
    Raw::new(lambda).mean()
}

/// Unit-mean crossover surmise. `lambda = 0` is the pure GOE surmise,
/// `lambda = inf` the pure GUE one.
pub fn crossover_surmise(s: f64, lambda: f64) -> f64 {
    let lambda = crossover_lambda(lambda);
    if lambda == 0.0 {
        return wigner_surmise_pure(1, s).expect("valid beta");
    }
    if lambda.is_infinite() {
        return wigner_surmise_pure(2, s).expect("valid beta");
    }
    let raw = Raw::new(lambda);
    let mu = raw.mean();
    mu * raw.density(mu * s)
}

/// Cumulative distribution of [`crossover_surmise`].
pub fn crossover_surmise_cdf(s: f64, lambda: f64) -> f64 {
    let lambda = crossover_lambda(lambda);
    if lambda == 0.0 {
        return wigner_surmise_pure_cdf(1, s).expect("valid beta");
    }
    if lambda.is_infinite() {
        return wigner_surmise_pure_cdf(2, s).expect("valid beta");
    }
    let raw = Raw::new(lambda);
    raw.cdf(raw.mean() * s)
}

/// Which surmise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SurmiseSpec {
    Pure { beta: u8 },
    Crossover { lambda: f64 },
}

impl SurmiseSpec {
    pub fn pure(beta: u8) -> Result<SurmiseSpec> {
        check_beta(beta)?;
        Ok(SurmiseSpec::Pure { beta })
    }

    pub fn crossover(lambda: f64) -> Result<SurmiseSpec> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(SurmiseSpec::Crossover { lambda })
    }

    pub fn density(&self, s: f64) -> f64 {
        match *self {
            SurmiseSpec::Pure { beta } => wigner_surmise_pure(beta, s).unwrap_or(f64::NAN),
            SurmiseSpec::Crossover { lambda } => crossover_surmise(s, lambda),
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        match *self {
            SurmiseSpec::Pure { beta } => wigner_surmise_pure_cdf(beta, s).unwrap_or(f64::NAN),
            SurmiseSpec::Crossover { lambda } => crossover_surmise_cdf(s, lambda),
        }
    }
}

impl std::fmt::Display for SurmiseSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SurmiseSpec::Pure { beta } => write!(f, "surmise(beta={beta})"),
            SurmiseSpec::Crossover { lambda } => write!(f, "surmise(lambda={lambda})"),
        }
    }
}

/// Spacings of directly sampled 2x2 matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurmiseSample {
    pub lambda: f64,
    pub seed: u64,
    /// Raw spacings.
    pub raw: Vec<f64>,
    /// Raw spacings divided by their sample mean.
    pub spacings: Vec<f64>,
    pub raw_mean: f64,
    pub raw_std_error: f64,
}

/// One raw spacing of `H1 + lambda H2`, H1 real symmetric and H2 complex
/// Hermitian with diagonal variance 1 and off-diagonal component variance 1/2.
fn sample_spacing(lambda: f64, seed: u64, index: u64) -> f64 {
    let mut rng = substream(seed, index);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let (a1, d1, b1) = (z(), z(), z() / SQRT_2);
    let (a2, d2, b2re, b2im) = (z(), z(), z() / SQRT_2, z() / SQRT_2);
    let diff = (a1 - d1) + lambda * (a2 - d2);
    let re = b1 + lambda * b2re;
    let im = lambda * b2im;
    (diff * diff + 4.0 * (re * re + im * im)).sqrt()
}

/// Monte Carlo oracle for the crossover surmise. Sample `i` uses its own
/// keyed substream, so results do not depend on evaluation order.
pub fn surmise_mc_oracle(lambda: f64, n_samples: usize, seed: u64) -> Result<SurmiseSample> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let key = domain_seed(seed, "surmise-2x2");
    let raw = map_range(n_samples, |i| sample_spacing(lambda, key, i as u64));
    let (raw_mean, raw_std_error) = if n_samples > 1 {
        mean_and_std_error(&raw)
    } else {
        (raw[0], f64::NAN)
    };
    let spacings = raw.iter().map(|r| r / raw_mean).collect();
    Ok(SurmiseSample {
        lambda,
        seed,
        raw,
        spacings,
        raw_mean,
        raw_std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;

    /// Integral with breakpoints, so narrow features near 0 are resolved.
    fn integral(f: impl Fn(f64) -> f64, cuts: &[f64]) -> f64 {
        cuts.windows(2)
            .map(|w| integrate_adaptive(&f, w[0], w[1], 1e-14).unwrap())
            .sum()
    }

    fn moments(f: impl Fn(f64) -> f64, upper: f64) -> (f64, f64) {
        let cuts = [0.0, 1e-3, 1e-2, 0.1, 1.0, upper];
        (integral(&f, &cuts), integral(|s| s * f(s), &cuts))
    }

    #[test]
    fn pure_forms_are_normalized() {
        for beta in [1, 2, 4] {
            let (m0, m1) = moments(|s| wigner_surmise_pure(beta, s).unwrap(), 20.0);
            assert!((m0 - 1.0).abs() < 1e-10, "beta {beta}: {m0}");
            assert!((m1 - 1.0).abs() < 1e-10, "beta {beta}: {m1}");
        }
        assert_eq!(wigner_surmise_pure(1, 0.0).unwrap(), 0.0);
        assert!(wigner_surmise_pure(3, 1.0).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn pure_cdfs_match_integrated_densities() {
        for beta in [1, 2, 4] {
            for s in [0.1, 0.7, 1.3, 2.9] {
                let q = integrate_adaptive(|x| wigner_surmise_pure(beta, x).unwrap(), 0.0, s, 1e-14)
                    .unwrap();
                let c = wigner_surmise_pure_cdf(beta, s).unwrap();
                assert!((q - c).abs() < 1e-13, "beta {beta} s {s}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn crossover_limits() {
        for s in [0.0, 0.3, 1.0, 2.5] {
            let d = crossover_surmise(s, 0.0) - wigner_surmise_pure(1, s).unwrap();
            assert!(d.abs() <= 1e-12);
        }
        for s in [0.5, 1.0, 2.0] {
            let d = crossover_surmise(s, 1e3) - wigner_surmise_pure(2, s).unwrap();
            assert!(d.abs() <= 1e-4, "s {s}: {d}");
        }
        // continuity at lambda -> 0+
        let d = crossover_surmise(0.8, 1e-9) - crossover_surmise(0.8, 0.0);
        assert!(d.abs() < 1e-8);
        assert_eq!(crossover_raw_mean(0.0), PI.sqrt());
    }

    #[test]
    fn crossover_normalized_across_lambda() {
        for k in 0..=24 {
            let lambda = 10f64.powf(-3.0 + 0.25 * k as f64);
            let (m0, m1) = moments(|s| crossover_surmise(s, lambda), 30.0);
            assert!((m0 - 1.0).abs() < 1e-8, "lambda {lambda}: mass {m0}");
            assert!((m1 - 1.0).abs() < 1e-8, "lambda {lambda}: mean {m1}");
        }
    }

    #[test]
    fn crossover_cdf_matches_density() {
        for lambda in [1e-3, 0.05, 0.2759, 1.0, 30.0] {
            for s in [0.01, 0.4, 1.0, 2.2] {
                let cuts: Vec<f64> = [0.0, 1e-3, 1e-2, 0.1, s].into_iter().filter(|&c| c <= s).collect();
                let q = integral(|x| crossover_surmise(x, lambda), &cuts);
                let c = crossover_surmise_cdf(s, lambda);
                assert!((q - c).abs() < 1e-12, "lambda {lambda} s {s}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn small_spacing_behaviour() {
        // quadratic below the scale lambda, GOE-like linear above it
        for lambda in [0.01, 0.1, 1.0] {
            let mu = crossover_raw_mean(lambda);
            let big_a = 1.0 + lambda * lambda;
            let coef = mu.powi(3) / (2.0 * big_a.sqrt()) * 2.0 / PI.sqrt() * 0.5 / (lambda * big_a.sqrt());
            let s = 1e-6;
            let ratio = crossover_surmise(s, lambda) / (s * s);
            assert!((ratio / coef - 1.0).abs() < 1e-6, "lambda {lambda}: {ratio} vs {coef}");
        }
        let s = 0.05;
        let r = crossover_surmise(s, 1e-4) / wigner_surmise_pure(1, s).unwrap();
        assert!((r - 1.0).abs() < 1e-3);
    }

    #[test]
    fn peak_height_moves_monotonically_between_classes() {
        let peak = |f: &dyn Fn(f64) -> f64| (1..600).map(|i| f(i as f64 * 0.005)).fold(0.0, f64::max);
        let lo = peak(&|s| wigner_surmise_pure(1, s).unwrap());
        let hi = peak(&|s| wigner_surmise_pure(2, s).unwrap());
        let mut prev = lo;
        for k in 0..=30 {
            let lambda = 10f64.powf(-3.0 + 0.2 * k as f64);
            let p = peak(&|s| crossover_surmise(s, lambda));
            assert!(p >= prev - 1e-12 && p <= hi + 1e-12, "lambda {lambda}: {p}");
            prev = p;
        }
    }

    #[test]
    fn oracle_is_deterministic() {
        let a = surmise_mc_oracle(0.3, 1000, 5).unwrap();
        let b = surmise_mc_oracle(0.3, 1000, 5).unwrap();
        assert_eq!(a, b);
        let c = surmise_mc_oracle(0.3, 1000, 6).unwrap();
        assert_ne!(a.raw, c.raw);
        let mean: f64 = a.spacings.iter().sum::<f64>() / 1000.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(surmise_mc_oracle(0.3, 0, 5).is_err());
    }

    #[test]
    fn spec_rejects_bad_parameters() {
        assert!(SurmiseSpec::pure(3).is_err());
        assert!(SurmiseSpec::crossover(-1.0).is_err());
        assert!(SurmiseSpec::crossover(f64::NAN).is_err());
        let s = SurmiseSpec::crossover(0.0).unwrap();
        assert_eq!(s.density(0.7), wigner_surmise_pure(1, 0.7).unwrap());
    }
}
