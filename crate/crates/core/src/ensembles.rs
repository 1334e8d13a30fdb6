//! Finite-N Gaussian ensembles: sampling, spectra, unfolding.
//!
//! The crossover ensemble is `H = H1 + alpha H2` with `H1` from the GOE
//! (diagonal variance 1, off-diagonal 1/2) and `H2` from the GUE (diagonal
//! variance 1, real and imaginary off-diagonal parts 1/2 each). Pure classes
//! (`beta == beta_prime`, `alpha = 0`) are sampled from the tridiagonal
//! beta-Hermite model, which is what makes GSE spectra cheap.

use std::f64::consts::{PI, SQRT_2};

use faer::linalg::solvers::SolveLstsq;
use faer::{c64, Mat, Par, Side};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_range;
use crate::rng::{domain_seed, substream};

/// Fraction of each spectrum around its centre used to measure `Delta`.
pub const CENTRAL_DELTA_FRACTION: f64 = 0.1;
/// Degree of the odd polynomial fitted to the integrated density.
pub const UNFOLDING_DEGREE: usize = 7;
/// Fewest spectra [`unfold_and_collect`] accepts.
pub const MIN_SPECTRA: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub beta: u8,
    pub beta_prime: u8,
    pub alpha: f64,
    pub n: usize,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_bulk")]
    pub bulk_fraction: f64,
}

fn default_bulk() -> f64 {
    0.5
}

impl EnsembleConfig {
    /// GOE + alpha GUE with the default bulk window.
    pub fn crossover(alpha: f64, n: usize, n_samples: usize, seed: u64) -> Result<Self> {
        let c = EnsembleConfig {
            beta: 1,
            beta_prime: 2,
            alpha,
            n,
            n_samples,
            seed,
            bulk_fraction: default_bulk(),
        };
        c.validate()?;
        Ok(c)
    }

    /// A single pure class.
    pub fn pure(beta: u8, n: usize, n_samples: usize, seed: u64) -> Result<Self> {
        let c = EnsembleConfig {
            beta,
            beta_prime: beta,
            alpha: 0.0,
            n,
            n_samples,
            seed,
            bulk_fraction: default_bulk(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_bulk_fraction(mut self, bulk_fraction: f64) -> Result<Self> {
        self.bulk_fraction = bulk_fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn is_pure(&self) -> bool {
        self.beta == self.beta_prime
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n > 2000 {
            return Err(Error::invalid(format!("matrix size must be in 4..=2000, got {}", self.n)));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be >= 1"));
        }
        if !(self.bulk_fraction > 0.0 && self.bulk_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "bulk fraction must be in (0, 1], got {}",
                self.bulk_fraction
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        match (self.beta, self.beta_prime) {
            (1, 2) => Ok(()),
            (b, bp) if b == bp && matches!(b, 1 | 2 | 4) => {
                if self.alpha != 0.0 {
                    Err(Error::invalid("a pure class takes alpha = 0"))
                } else {
                    Ok(())
                }
            }
            (b, bp) => Err(Error::invalid(format!(
                "only the (beta, beta') = (1, 2) crossover or a pure class is supported, got ({b}, {bp})"
            ))),
        }
    }
}

/// Dense Hermitian matrix, row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl HermitianMatrix {
    pub fn from_real(n: usize, re: Vec<f64>) -> Result<Self> {
        if re.len() != n * n {
            return Err(Error::invalid("matrix buffer has wrong length"));
        }
        Ok(HermitianMatrix {
            n,
            re,
            im: vec![0.0; n * n],
        })
    }

    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        (self.re[i * self.n + j], self.im[i * self.n + j])
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.re[i * self.n + i]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.im.iter().all(|&x| x == 0.0)
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw `H1 + alpha H2` for `sample_index`. Both parts are always drawn, so
/// samples with the same index are coupled across `alpha`.
pub fn sample_matrix(config: &EnsembleConfig, sample_index: u64) -> Result<HermitianMatrix> {
    config.validate()?;
    if config.is_pure() {
        return Err(Error::invalid(
            "pure classes are sampled in tridiagonal form; use sample_spectrum",
        ));
    }
    let n = config.n;
    let a = config.alpha;
    let mut rng = substream(domain_seed(config.seed, "ensemble-dense"), sample_index);
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for i in 0..n {
        re[i * n + i] = gaussian(&mut rng) + a * gaussian(&mut rng);
        for j in 0..i {
            let h1 = gaussian(&mut rng) / SQRT_2;
            let h2re = gaussian(&mut rng) / SQRT_2;
            let h2im = gaussian(&mut rng) / SQRT_2;
            let x = h1 + a * h2re;
            let y = a * h2im;
            re[i * n + j] = x;
            re[j * n + i] = x;
            im[i * n + j] = y;
            im[j * n + i] = -y;
        }
    }
    Ok(HermitianMatrix { n, re, im })
}

/// Ascending eigenvalues. The input is symmetrized first.
pub fn spectrum(h: &HermitianMatrix) -> Result<Vec<f64>> {
    faer::set_global_parallelism(Par::Seq);
    let n = h.n;
    let sym = |i: usize, j: usize| {
        let (a, b) = h.get(i, j);
        let (c, d) = h.get(j, i);
        (0.5 * (a + c), 0.5 * (b - d))
    };
    let result = if h.is_real() {
        Mat::<f64>::from_fn(n, n, |i, j| sym(i, j).0).self_adjoint_eigenvalues(Side::Lower)
    } else {
        Mat::<c64>::from_fn(n, n, |i, j| {
            let (x, y) = sym(i, j);
            c64::new(x, y)
        })
        .self_adjoint_eigenvalues(Side::Lower)
    };
    let mut ev = result.map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Eigenvalues of one beta-Hermite tridiagonal matrix, whose joint density
/// is `prod |l_i - l_j|^beta exp(-sum l^2 / 2)`.
fn beta_hermite_spectrum(beta: u8, n: usize, seed: u64, sample_index: u64) -> Result<Vec<f64>> {
    let mut rng = substream(domain_seed(seed, "ensemble-tridiagonal"), sample_index);
    let diag: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let dof = beta as f64 * (n - k) as f64;
            let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom");
            chi2.sample(&mut rng).sqrt() / SQRT_2
        })
        .collect();
    let m = Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i == j + 1 {
            off[j]
        } else if j == i + 1 {
            off[i]
        } else {
            0.0
        }
    });
    faer::set_global_parallelism(Par::Seq);
    let mut ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed for sample {sample_index}: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Spectrum of sample `sample_index` of `config`.
pub fn sample_spectrum(config: &EnsembleConfig, sample_index: u64) -> Result<Vec<f64>> {
    config.validate()?;
    if config.is_pure() {
        beta_hermite_spectrum(config.beta, config.n, config.seed, sample_index)
    } else {
        spectrum(&sample_matrix(config, sample_index)?).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("{msg} (sample {sample_index})")),
            other => other,
        })
    }
}

/// Unfolded nearest-neighbour spacings of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingSample {
    pub spacings: Vec<f64>,
    pub n_kept: usize,
    /// Mean raw spacing among the central levels.
    pub delta: f64,
    pub lambda_big_measured: f64,
    /// Coefficients of `N(e) = c0 + c1 x + c3 x^3 + ...`, `x = e / scale`.
    pub unfolding: Vec<f64>,
    pub unfolding_scale: f64,
    pub config: EnsembleConfig,
}

impl SpacingSample {
    pub fn mean(&self) -> f64 {
        self.spacings.iter().sum::<f64>() / self.spacings.len() as f64
    }
}

fn window(n: usize, fraction: f64) -> std::ops::Range<usize> {
    let keep = ((n as f64 * fraction).round() as usize).clamp(1, n);
    let start = (n - keep) / 2;
    start..start + keep
}

/// Least-squares fit of the ensemble-averaged staircase by
/// `c0 + sum_k c_k x^k` over odd `k <= UNFOLDING_DEGREE`.
fn fit_staircase(points: &[(f64, f64)], scale: f64) -> Result<Vec<f64>> {
    let cols = 1 + UNFOLDING_DEGREE.div_ceil(2);
    if points.len() < cols {
        return Err(Error::invalid("too few levels to fit the integrated density"));
    }
    let a = Mat::<f64>::from_fn(points.len(), cols, |i, j| {
        let x = points[i].0 / scale;
        if j == 0 {
            1.0
        } else {
            x.powi(2 * j as i32 - 1)
        }
    });
    let b = Mat::<f64>::from_fn(points.len(), 1, |i, _| points[i].1);
    faer::set_global_parallelism(Par::Seq);
    let c = a.qr().solve_lstsq(&b);
    Ok((0..cols).map(|j| c[(j, 0)]).collect())
}

fn eval_staircase(coef: &[f64], scale: f64, e: f64) -> f64 {
    let x = e / scale;
    let x2 = x * x;
    let mut acc = 0.0;
    for &c in coef[1..].iter().rev() {
        acc = acc * x2 + c;
    }
    coef[0] + acc * x
}

/// Unfold the central `bulk_fraction` of every spectrum with the ensemble
/// staircase fit, rescale to unit sample mean, and measure `Delta` and
/// `Lambda = sqrt(pi) alpha / Delta`.
pub fn unfold_and_collect(config: &EnsembleConfig, spectra: &[Vec<f64>]) -> Result<SpacingSample> {
    if spectra.len() < MIN_SPECTRA {
        return Err(Error::invalid(format!(
            "need at least {MIN_SPECTRA} spectra to unfold, got {}",
            spectra.len()
        )));
    }
    let n = spectra[0].len();
    if spectra.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("spectra have different lengths"));
    }
    let bulk = window(n, config.bulk_fraction);
    if bulk.len() < 4 {
        return Err(Error::invalid(format!(
            "only {} levels per spectrum left after the bulk cut",
            bulk.len()
        )));
    }

    // Ensemble staircase: the k-th smallest of the pooled bulk levels sits at
    // count start + (k + 1/2) / n_spectra.
    let mut pooled: Vec<f64> = spectra.iter().flat_map(|s| s[bulk.clone()].iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    let ns = spectra.len() as f64;
    let points: Vec<(f64, f64)> = pooled
        .iter()
        .enumerate()
        .map(|(k, &e)| (e, bulk.start as f64 + (k as f64 + 0.5) / ns))
        .collect();
    let scale = pooled.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(f64::MIN_POSITIVE);
    let coef = fit_staircase(&points, scale)?;

    let mut spacings = Vec::with_capacity(spectra.len() * (bulk.len() - 1));
    for s in spectra {
        let unfolded: Vec<f64> = s[bulk.clone()].iter().map(|&e| eval_staircase(&coef, scale, e)).collect();
        spacings.extend(unfolded.windows(2).map(|w| w[1] - w[0]));
    }
    if spacings.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Numerical("unfolding produced a non-positive spacing".into()));
    }
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    spacings.iter_mut().for_each(|x| *x /= mean);

    let centre = window(n, CENTRAL_DELTA_FRACTION);
    let centre = if centre.len() < 2 { window(n, 2.0 / n as f64) } else { centre };
    let (sum, count) = spectra.iter().fold((0.0, 0usize), |(sum, count), s| {
        (sum + s[centre.end - 1] - s[centre.start], count + centre.len() - 1)
    });
    let delta = sum / count as f64;

    Ok(SpacingSample {
        n_kept: spacings.len(),
        spacings,
        delta,
        lambda_big_measured: PI.sqrt() * config.alpha / delta,
        unfolding: coef,
        unfolding_scale: scale,
        config: *config,
    })
}

/// Sample, diagonalize and unfold.
pub fn simulate(config: &EnsembleConfig) -> Result<SpacingSample> {
    config.validate()?;
    let spectra = map_range(config.n_samples, |i| sample_spectrum(config, i as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    unfold_and_collect(config, &spectra)
}

/// Semicircle estimate of the mean spacing at the centre of the crossover
/// ensemble: radius `sqrt(2 N (1 + 2 alpha^2))`.
pub fn semicircle_delta(n: usize, alpha: f64) -> f64 {
    let radius = (2.0 * n as f64 * (1.0 + 2.0 * alpha * alpha)).sqrt();
    PI * radius / (2.0 * n as f64)
}

/// Outcome of tuning `alpha` to a target `Lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSolve {
    pub alpha: f64,
    pub lambda_big_measured: f64,
    pub iterations: Vec<(f64, f64)>,
}

/// Secant iteration on the measured `Lambda(alpha)` using `probe_samples`
/// spectra per evaluation, started from the semicircle estimate.
pub fn solve_alpha(
    target: f64,
    n: usize,
    probe_samples: usize,
    seed: u64,
    bulk_fraction: f64,
    rel_tol: f64,
) -> Result<AlphaSolve> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::invalid(format!("target Lambda must be > 0, got {target}")));
    }
    let measure = |alpha: f64| -> Result<f64> {
        let c = EnsembleConfig::crossover(alpha, n, probe_samples.max(MIN_SPECTRA), seed)?
            .with_bulk_fraction(bulk_fraction)?;
        Ok(simulate(&c)?.lambda_big_measured)
    };
    let mut alpha0 = target * semicircle_delta(n, 0.0) / PI.sqrt();
    for _ in 0..5 {
        alpha0 = target * semicircle_delta(n, alpha0) / PI.sqrt();
    }
    let mut iterations = vec![(alpha0, measure(alpha0)?)];
    let alpha1 = alpha0 * target / iterations[0].1;
    iterations.push((alpha1, measure(alpha1)?));
    for _ in 0..10 {
        let (a0, l0) = iterations[iterations.len() - 2];
        let (a1, l1) = iterations[iterations.len() - 1];
        if ((l1 - target) / target).abs() <= rel_tol {
            break;
        }
        let next = if l1 != l0 { a1 - (l1 - target) * (a1 - a0) / (l1 - l0) } else { a1 * target / l1 };
        let next = next.clamp(0.5 * a1, 2.0 * a1);
        iterations.push((next, measure(next)?));
    }
    let &(alpha, lambda_big_measured) = iterations.last().expect("nonempty");
    if ((lambda_big_measured - target) / target).abs() > rel_tol {
        return Err(Error::Numerical(format!(
            "alpha solve did not reach Lambda = {target} (last {lambda_big_measured})"
        )));
    }
    Ok(AlphaSolve {
        alpha,
        lambda_big_measured,
        iterations,
    })
}
