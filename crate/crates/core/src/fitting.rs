//! L2 fits of the crossover surmise to exact or simulated spacing densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fredholm::{trapezoid, LsdCurve};
use crate::parallel::map_collect;
use crate::stats::Histogram;
use crate::surmise::crossover_surmise;

/// Default fit window.
pub const DEFAULT_WINDOW: (f64, f64) = (0.0, 6.0);
/// Default search tolerance on lambda.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Search range and bracketing grid.
pub const LAMBDA_RANGE: (f64, f64) = (1e-4, 10.0);
pub const BRACKET_POINTS: usize = 40;
/// Histogram used for Monte Carlo targets.
pub const DEFAULT_BINS: usize = 60;
/// Evaluation step for binned targets.
pub const BINNED_STEP: f64 = 0.01;
/// Two bracket minima closer than this relative gap in `Delta_2` are both reported.
pub const TIE_FRACTION: f64 = 0.1;

/// A density tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub id: String,
    pub s: Vec<f64>,
    pub values: Vec<f64>,
}

impl Tabulated {
    pub fn new(id: impl Into<String>, s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if s.len() != values.len() || s.len() < 2 {
            return Err(Error::invalid("tabulated density needs >= 2 points and matching lengths"));
        }
        if !s.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("tabulated grid must be strictly increasing"));
        }
        Ok(Tabulated {
            id: id.into(),
            s,
            values,
        })
    }

    pub fn from_lsd(curve: &LsdCurve) -> Self {
        Tabulated {
            id: format!("{}|m={}|{}", curve.source, curve.m, curve.gap_cache_key),
            s: curve.grid.points().to_vec(),
            values: curve.values.clone(),
        }
    }

    /// Step density of a histogram evaluated on `[lo, hi]` with spacing `step`.
    pub fn from_histogram(id: impl Into<String>, hist: &Histogram, step: f64) -> Result<Self> {
        let (lo, hi) = (hist.edges[0], *hist.edges.last().expect("nonempty edges"));
        let n = ((hi - lo) / step).round() as usize;
        let s: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
        let values = s.iter().map(|&x| hist.step_density(x)).collect();
        Tabulated::new(id, s, values)
    }

    /// A closed-form density sampled on `s`.
    pub fn from_fn(id: impl Into<String>, s: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = s.iter().map(|&x| f(x)).collect();
        Tabulated::new(id, s, values)
    }

    pub fn step(&self) -> f64 {
        (self.s[self.s.len() - 1] - self.s[0]) / (self.s.len() - 1) as f64
    }

    /// Indices of grid points inside `window`, or an error when the window
    /// is not covered.
    fn window_range(&self, window: (f64, f64)) -> Result<std::ops::Range<usize>> {
        let (lo, hi) = window;
        let tol = 1e-9 * self.step();
        if !(lo < hi) || lo < self.s[0] - tol || hi > self.s[self.s.len() - 1] + tol {
            return Err(Error::invalid(format!(
                "window [{lo}, {hi}] not inside the tabulated domain [{}, {}]",
                self.s[0],
                self.s[self.s.len() - 1]
            )));
        }
        let start = self.s.partition_point(|&x| x < lo - tol);
        let end = self.s.partition_point(|&x| x <= hi + tol);
        if end - start < 2 {
            return Err(Error::invalid("window contains fewer than two grid points"));
        }
        Ok(start..end)
    }
}

/// `sqrt(int_window (P - Q)^2 ds)` by the trapezoid rule on `p`'s grid.
pub fn l2_distance<Q: Fn(f64) -> f64>(p: &Tabulated, q: Q, window: (f64, f64)) -> Result<f64> {
    let r = p.window_range(window)?;
    let s = &p.s[r.clone()];
    let sq: Vec<f64> = s.iter().zip(&p.values[r]).map(|(&x, &v)| (v - q(x)).powi(2)).collect();
    Ok(trapezoid(s, &sq).sqrt())
}

/// L2 distance between two tabulations on the same grid.
pub fn l2_between(p: &Tabulated, q: &Tabulated, window: (f64, f64)) -> Result<f64> {
    if p.s != q.s {
        return Err(Error::invalid("l2_between needs identical grids"));
    }
    let r = p.window_range(window)?;
    let sq: Vec<f64> = p.values[r.clone()]
        .iter()
        .zip(&q.values[r.clone()])
        .map(|(a, b)| (a - b).powi(2))
        .collect();
    Ok(trapezoid(&p.s[r], &sq).sqrt())
}

/// `Delta_2 <= its value at lambda_star +- step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    pub step: f64,
    pub delta2_minus: f64,
    pub delta2_plus: f64,
    pub locally_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda_star: f64,
    pub delta2: f64,
    pub window: (f64, f64),
    pub grid_step: f64,
    pub target: String,
    pub tolerance: f64,
    pub certificate: OptimalityCertificate,
    /// Another bracket minimum within 10% of `delta2`, if any.
    pub secondary: Option<(f64, f64)>,
    /// Best `(lambda, Delta_2)` after each golden-section step.
    pub trace: Vec<(f64, f64)>,
    /// Histogram bin count for Monte Carlo targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// `(bins, lambda_star)` refits for Monte Carlo targets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bin_sensitivity: Vec<(usize, f64)>,
}

fn bracket_grid() -> Vec<f64> {
    let (lo, hi) = LAMBDA_RANGE;
    (0..BRACKET_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / (BRACKET_POINTS - 1) as f64))
        .collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum on `[a, b]`.
fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, Vec<(f64, f64)>) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut trace = Vec::new();
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    trace.push(best);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        let cand = if fc <= fd { (c, fc) } else { (d, fd) };
        if cand.1 <= best.1 {
            best = cand;
        }
        trace.push(best);
    }
    (best.0, best.1, trace)
}

/// Fit `lambda` of the crossover surmise to `target` by minimizing
/// `Delta_2` over `window`: 40-point log bracket on `[1e-4, 10]`, then
/// golden section to `tolerance`.
pub fn fit_lambda(target: &Tabulated, window: (f64, f64), tolerance: f64) -> Result<FitResult> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid(format!("tolerance must be > 0, got {tolerance}")));
    }
    target.window_range(window)?;
    let objective = |lambda: f64| {
        l2_distance(target, |s| crossover_surmise(s, lambda), window).unwrap_or(f64::INFINITY)
    };
    let lambdas = bracket_grid();
    let values = map_collect(&lambdas, |&l| objective(l));

    let mut minima: Vec<usize> = (1..lambdas.len() - 1)
        .filter(|&i| values[i] <= values[i - 1] && values[i] <= values[i + 1])
        .collect();
    if minima.is_empty() {
        return Err(Error::Fit(format!(
            "no interior minimum on [{}, {}]: Delta_2 = {:e} at lambda = {}, {:e} at lambda = {}",
            LAMBDA_RANGE.0,
            LAMBDA_RANGE.1,
            values[0],
            lambdas[0],
            values[lambdas.len() - 1],
            lambdas[lambdas.len() - 1]
        )));
    }
    minima.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    // Searching to tolerance / 4 puts lambda_star within tolerance / 2 of the
    // minimum, so the +-tolerance certificate holds for a locally quadratic objective.
    let refine = |i: usize| golden_section(&objective, lambdas[i - 1], lambdas[i + 1], 0.25 * tolerance);
    let (lambda_star, delta2, trace) = refine(minima[0]);
    let secondary = minima
        .iter()
        .skip(1)
        .find(|&&i| values[i] <= (1.0 + TIE_FRACTION) * values[minima[0]])
        .map(|&i| {
            let (l, d, _) = refine(i);
            (l, d)
        });

    let step = tolerance;
    let delta2_minus = objective((lambda_star - step).max(0.0));
    let delta2_plus = objective(lambda_star + step);
    Ok(FitResult {
        lambda_star,
        delta2,
        window,
        grid_step: target.step(),
        target: target.id.clone(),
        tolerance,
        certificate: OptimalityCertificate {
            step,
            delta2_minus,
            delta2_plus,
            locally_optimal: delta2 <= delta2_minus && delta2 <= delta2_plus,
        },
        secondary,
        trace,
        bins: None,
        bin_sensitivity: Vec::new(),
    })
}

/// Fit to a sample of unit-mean spacings through a `bins`-bin histogram on
/// `window`; the fit is repeated with half and double the bins to report
/// the sensitivity.
pub fn fit_lambda_to_sample(
    id: &str,
    spacings: &[f64],
    bins: usize,
    window: (f64, f64),
    tolerance: f64,
) -> Result<FitResult> {
    let fit = |bins: usize| -> Result<FitResult> {
        let hist = Histogram::new(spacings, window.0, window.1, bins)?;
        let target = Tabulated::from_histogram(format!("{id}|bins={bins}"), &hist, BINNED_STEP)?;
        fit_lambda(&target, window, tolerance)
    };
    let mut main = fit(bins)?;
    main.bins = Some(bins);
    for alt in [bins / 2, bins * 2] {
        if alt >= 2 {
            main.bin_sensitivity.push((alt, fit(alt)?.lambda_star));
        }
    }
    Ok(main)
}

/// Pointwise ratio of two tabulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub points: Vec<(f64, f64)>,
    /// Common points skipped because the denominator was below 1e-12.
    pub omitted: usize,
}

/// `numerator / denominator` on their common grid points with `s >= s_min_cut`.
pub fn ratio_curve(numerator: &Tabulated, denominator: &Tabulated, s_min_cut: f64) -> Result<RatioCurve> {
    if !(s_min_cut > 0.0) {
        return Err(Error::invalid("s_min_cut must be > 0 to exclude s = 0"));
    }
    let tol = 1e-9 * numerator.step().min(denominator.step());
    let mut points = Vec::new();
    let mut omitted = 0;
    let mut common = 0;
    let mut j = 0;
    for (i, &s) in numerator.s.iter().enumerate() {
        while j < denominator.s.len() && denominator.s[j] < s - tol {
            j += 1;
        }
        if j == denominator.s.len() {
            break;
        }
        if (denominator.s[j] - s).abs() <= tol {
            common += 1;
            if s + tol < s_min_cut {
                continue;
            }
            let d = denominator.values[j];
            if d > 1e-12 {
                points.push((s, numerator.values[i] / d));
            } else {
                omitted += 1;
            }
        }
    }
    if common == 0 {
        return Err(Error::invalid("ratio_curve: grids have no points in common"));
    }
    Ok(RatioCurve { points, omitted })
}

/// `|lambda_star / Lambda - 1|`.
pub fn surmise_bias(lambda_star: f64, lambda_big: f64) -> Result<f64> {
    if lambda_big == 0.0 || !lambda_big.is_finite() {
        return Err(Error::invalid(format!("Lambda must be nonzero and finite, got {lambda_big}")));
    }
    Ok((lambda_star / lambda_big - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;
    use crate::surmise::wigner_surmise_pure;

    fn grid(step: f64, hi: f64) -> Vec<f64> {
        let n = (hi / step).round() as usize;
        (0..=n).map(|i| i as f64 * step).collect()
    }

    fn surmise_tab(lambda: f64) -> Tabulated {
        Tabulated::from_fn("surmise", grid(0.01, 6.0), |s| crossover_surmise(s, lambda)).unwrap()
    }

    #[test]
    fn distance_to_self_is_zero_and_symmetric() {
        let p = surmise_tab(0.3);
        assert_eq!(l2_distance(&p, |s| crossover_surmise(s, 0.3), (0.0, 6.0)).unwrap(), 0.0);
        let q = surmise_tab(0.7);
        assert_eq!(l2_between(&p, &q, (0.0, 6.0)).unwrap(), l2_between(&q, &p, (0.0, 6.0)).unwrap());
    }

    #[test]
    fn distance_from_zero_matches_quadrature() {
        let zero = Tabulated::from_fn("zero", grid(0.001, 6.0), |_| 0.0).unwrap();
        let got = l2_distance(&zero, |s| wigner_surmise_pure(1, s).unwrap(), (0.0, 6.0)).unwrap();
        let exact = integrate_adaptive(|s| wigner_surmise_pure(1, s).unwrap().powi(2), 0.0, 6.0, 1e-14)
            .unwrap()
            .sqrt();
        assert!((got - exact).abs() < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn window_must_be_covered() {
        let p = surmise_tab(0.3);
        assert!(l2_distance(&p, |_| 0.0, (0.0, 7.0)).unwrap_err().is_invalid_argument());
        assert!(l2_distance(&p, |_| 0.0, (2.0, 1.0)).is_err());
    }

    #[test]
    fn self_fit_recovers_lambda() {
        for lambda in [0.05, 0.3, 1.0] {
            let r = fit_lambda(&surmise_tab(lambda), DEFAULT_WINDOW, DEFAULT_TOLERANCE).unwrap();
            assert!((r.lambda_star - lambda).abs() <= 1e-3, "{lambda}: {}", r.lambda_star);
            assert!(r.delta2 < 1e-3, "{}", r.delta2);
            assert!(r.certificate.locally_optimal);
            assert!(r.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        }
    }

    #[test]
    fn monotone_objective_has_no_bracket() {
        // Pure GUE surmise sits at lambda = inf, beyond the search range.
        let t = Tabulated::from_fn("gue", grid(0.01, 6.0), |s| wigner_surmise_pure(2, s).unwrap()).unwrap();
        match fit_lambda(&t, DEFAULT_WINDOW, DEFAULT_TOLERANCE) {
            Err(Error::Fit(msg)) => assert!(msg.contains("no interior minimum")),
            other => panic!("expected fit failure, got {other:?}"),
        }
    }

    #[test]
    fn ratio_of_identical_curves_is_one() {
        let p = surmise_tab(0.4);
        let r = ratio_curve(&p, &p, 0.05).unwrap();
        assert!(r.points.iter().all(|&(s, x)| s >= 0.05 - 1e-12 && x == 1.0));
        // only the far tail underflows the threshold
        assert_eq!(r.points.len() + r.omitted, 596);
        assert!(r.points.last().unwrap().0 > 5.0);
        let far = Tabulated::from_fn("far", vec![10.0, 11.0], |_| 1.0).unwrap();
        assert!(ratio_curve(&p, &far, 0.05).is_err());
    }

    #[test]
    fn ratio_skips_vanishing_denominators() {
        let num = Tabulated::from_fn("n", grid(0.5, 2.0), |_| 1.0).unwrap();
        let den = Tabulated::from_fn("d", grid(0.5, 2.0), |s| if s < 1.2 { 0.0 } else { 2.0 }).unwrap();
        let r = ratio_curve(&num, &den, 0.1).unwrap();
        assert_eq!(r.points, vec![(1.5, 0.5), (2.0, 0.5)]);
        assert_eq!(r.omitted, 2);
    }

    #[test]
    fn bias() {
        assert_eq!(surmise_bias(0.5, 0.5).unwrap(), 0.0);
        assert!((surmise_bias(0.9613, 1.0).unwrap() - 0.0387).abs() < 1e-12);
        assert!((surmise_bias(0.1828, 0.1).unwrap() - 0.828).abs() < 1e-12);
        assert!(surmise_bias(0.3, 0.0).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn binned_target() {
        let s = crate::surmise::surmise_mc_oracle(0.3, 200_000, 11).unwrap();
        let r = fit_lambda_to_sample("mc", &s.spacings, DEFAULT_BINS, DEFAULT_WINDOW, DEFAULT_TOLERANCE).unwrap();
        assert!((r.lambda_star - 0.3).abs() < 0.03, "{}", r.lambda_star);
        assert_eq!(r.bins, Some(60));
        assert_eq!(r.bin_sensitivity.len(), 2);
    }
}
