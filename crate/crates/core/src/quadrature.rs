//! Gauss–Legendre quadrature rules.
//!
//! Nodes are the roots of the Legendre polynomial `P_m`, found by Newton
//! iteration from Chebyshev-like initial guesses. Each root is confined to
//! its Bruns bracket; a Newton step that leaves the bracket is replaced by
//! bisection. Only the roots on the positive half-axis are computed, the rest
//! follow by reflection so the rule is symmetric to the last bit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported order.
pub const MAX_ORDER: usize = 10_000;

/// An `m`-point Gauss–Legendre rule on the interval `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    interval: (f64, f64),
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Iterate over `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Apply the rule to `f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    /// Map the rule affinely onto `[a, b]`.
    pub fn rescale(&self, a: f64, b: f64) -> Result<QuadratureRule> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::invalid(format!(
                "rescale requires finite a < b, got [{a}, {b}]"
            )));
        }
        let (a0, b0) = self.interval;
        let scale = (b - a) / (b0 - a0);
        let nodes = self.nodes.iter().map(|&x| a + (x - a0) * scale).collect();
        let weights = self.weights.iter().map(|&w| w * scale).collect();
        Ok(QuadratureRule {
            nodes,
            weights,
            interval: (a, b),
        })
    }
}

/// Free-function form of [`QuadratureRule::rescale`].
pub fn rescale(rule: &QuadratureRule, a: f64, b: f64) -> Result<QuadratureRule> {
    rule.rescale(a, b)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
pub fn legendre(m: usize, x: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=m {
        let k = k as f64;
        let p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = p_next;
    }
    // Derivative from P_m and P_{m-1}; valid away from x = +-1, which roots never reach.
    let dp = m as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// `(P_m(1 - u), P_m'(1 - u))`.
///
/// Same recurrence as [`legendre`] but parameterized by the distance `u` to
/// the endpoint, so roots near `x = 1` keep full relative accuracy in `1 - x`.
fn legendre_from_endpoint(m: usize, u: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = 1.0 - u;
    for k in 2..=m {
        let k = k as f64;
        let xp = p - u * p;
        let p_next = ((2.0 * k - 1.0) * xp - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = p_next;
    }
    let xp = p - u * p;
    let dp = m as f64 * (xp - p_prev) / (-u * (2.0 - u));
    (p, dp)
}

/// Root of `P_m` with index `k` (1-based, counted from `x = 1` downwards),
/// returned as `u = 1 - x`.
fn legendre_root(m: usize, k: usize) -> f64 {
    let mf = m as f64;
    let kf = k as f64;
    let to_u = |theta: f64| 2.0 * (0.5 * theta).sin().powi(2);
    // Bruns: (k - 1/2) pi / (m + 1/2) < theta_k < k pi / (m + 1/2).
    let mut lo = to_u((kf - 0.5) * PI / (mf + 0.5));
    let mut hi = to_u(kf * PI / (mf + 0.5));
    let mut u = to_u((kf - 0.25) * PI / (mf + 0.5));

    // P_m(1) = 1 and P_m changes sign at every root, so it has sign
    // (-1)^(k-1) just below root k (in u).
    let sign_lo = if (k - 1).is_multiple_of(2) { 1.0 } else { -1.0 };

    for _ in 0..100 {
        let (p, dp) = legendre_from_endpoint(m, u);
        if p == 0.0 {
            return u;
        }
        if p * sign_lo > 0.0 {
            lo = lo.max(u);
        } else {
            hi = hi.min(u);
        }
        // dP/du = -P'(x)
        let mut next = u + p / dp;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let done = (next - u).abs() <= 2.0 * f64::EPSILON * u;
        u = next;
        if done {
            break;
        }
    }
    let (p, dp) = legendre_from_endpoint(m, u);
    let polished = u + p / dp;
    if polished > lo && polished < hi {
        polished
    } else {
        u
    }
}

/// The `m`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> Result<QuadratureRule> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::invalid(format!(
            "quadrature order must be in 1..={MAX_ORDER}, got {m}"
        )));
    }
    let half = m / 2;
    // Positive roots as u = 1 - x with their [0, 1] weights, nearest the endpoint first.
    let upper: Vec<(f64, f64)> = (1..=half)
        .map(|k| {
            let u = legendre_root(m, k);
            let (_, dp) = legendre_from_endpoint(m, u);
            (u, 1.0 / (u * (2.0 - u) * dp * dp))
        })
        .collect();

    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for &(u, w) in upper.iter() {
        nodes.push(0.5 * u);
        weights.push(w);
    }
    if m % 2 == 1 {
        let (_, dp) = legendre(m, 0.0);
        nodes.push(0.5);
        weights.push(1.0 / (dp * dp));
    }
    for &(u, w) in upper.iter().rev() {
        nodes.push(1.0 - 0.5 * u);
        weights.push(w);
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        interval: (0.0, 1.0),
    })
}

/// Convenience: the `m`-point rule already mapped to `[a, b]`.
pub fn gauss_legendre_on(m: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    gauss_legendre(m)?.rescale(a, b)
}

/// Adaptive integration of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Each panel is integrated with a 10-point rule and accepted when that
/// agrees with the sum over its two halves; otherwise both halves recurse.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b || !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "adaptive integration needs finite a <= b and tol > 0, got [{a}, {b}], tol {tol}"
        )));
    }
    let rule = gauss_legendre(10)?;
    let panel = |lo: f64, hi: f64| (hi - lo) * rule.integrate(|t| f(lo + t * (hi - lo)));
    let mut total = 0.0;
    let mut stack = vec![(a, b, panel(a, b), tol, 0u32)];
    while let Some((lo, hi, whole, tol, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (left, right) = (panel(lo, mid), panel(mid, hi));
        if (left + right - whole).abs() <= tol || depth >= 40 {
            total += left + right;
        } else {
            stack.push((lo, mid, left, 0.5 * tol, depth + 1));
            stack.push((mid, hi, right, 0.5 * tol, depth + 1));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes(), &[0.5]);
        assert_eq!(r.weights(), &[1.0]);
    }

    #[test]
    fn two_point_rule_is_analytic() {
        let r = gauss_legendre(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert_relative_eq!(r.nodes()[0], 0.5 - d, epsilon = 1e-16);
        assert_relative_eq!(r.nodes()[1], 0.5 + d, epsilon = 1e-16);
        assert_relative_eq!(r.weights()[0], 0.5, epsilon = 1e-16);
        assert_relative_eq!(r.weights()[1], 0.5, epsilon = 1e-16);
    }

    #[test]
    fn five_point_rule_integrates_degree_nine() {
        let r = gauss_legendre(5).unwrap();
        assert!((r.integrate(|x| x.powi(9)) - 0.1).abs() < 1e-14);
    }

    #[test]
    fn invalid_orders_rejected() {
        assert!(gauss_legendre(0).unwrap_err().is_invalid_argument());
        assert!(gauss_legendre(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn rescale_examples() {
        let r = gauss_legendre(1).unwrap().rescale(0.0, 2.0).unwrap();
        assert_eq!(r.nodes(), &[1.0]);
        assert_eq!(r.weights(), &[2.0]);

        let r2 = gauss_legendre(2).unwrap();
        assert_eq!(r2.rescale(0.0, 1.0).unwrap(), r2);

        let r5 = gauss_legendre(5).unwrap().rescale(0.0, 3.0).unwrap();
        assert!((r5.integrate(|x| x * x) - 9.0).abs() < 1e-13);

        assert!(r5.rescale(1.0, 1.0).is_err());
        assert!(r5.rescale(2.0, 1.0).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(gauss_legendre(137).unwrap(), gauss_legendre(137).unwrap());
    }

    #[test]
    fn exactness_on_monomials_up_to_500() {
        for m in 1..=500 {
            let r = gauss_legendre(m).unwrap();
            for d in [0, m, 2 * m - 1] {
                let exact = 1.0 / (d as f64 + 1.0);
                let got = r.integrate(|x| x.powi(d as i32));
                assert!(
                    ((got - exact) / exact).abs() < 1e-12,
                    "m={m} d={d}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn invariants_hold_for_large_orders() {
        for m in [200, 1000, MAX_ORDER] {
            let r = gauss_legendre(m).unwrap();
            let sum: f64 = r.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-13, "m={m} sum={sum}");
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes()[0] > 0.0 && r.nodes()[m - 1] < 1.0);
            assert!(r.weights().iter().all(|&w| w > 0.0));
            for i in 0..m {
                assert!((r.nodes()[i] + r.nodes()[m - 1 - i] - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn nodes_are_legendre_roots() {
        // Residual measured as the Newton correction |P/P'|; |P| itself scales with P' ~ m^2.
        for m in [3, 10, 64, 200, 500] {
            let r = gauss_legendre(m).unwrap();
            for &t in r.nodes() {
                let (p, dp) = legendre(m, 2.0 * t - 1.0);
                assert!((p / dp).abs() <= 1e-14, "m={m} node {t}: {}", p / dp);
            }
        }
    }

    #[test]
    fn adaptive_integration_handles_peaks() {
        let got = integrate_adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
        assert_eq!(integrate_adaptive(|x| x, 1.0, 1.0, 1e-9).unwrap(), 0.0);
        assert!(integrate_adaptive(|x| x, 1.0, 0.0, 1e-9).is_err());
    }

    proptest! {
        #[test]
        fn rescale_round_trip(m in 1usize..120, a in -50.0f64..50.0, len in 1e-3f64..100.0) {
            let r = gauss_legendre(m).unwrap();
            let back = r.rescale(a, a + len).unwrap().rescale(0.0, 1.0).unwrap();
            for (x, y) in r.nodes().iter().zip(back.nodes()) {
                prop_assert!((x - y).abs() <= 1e-14 * (1.0 + a.abs() / len));
            }
            for (x, y) in r.weights().iter().zip(back.weights()) {
                prop_assert!((x - y).abs() <= 1e-14);
            }
        }
    }
}
