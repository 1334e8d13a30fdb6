//! Second derivatives of uniformly sampled functions.
//!
//! Two independent sixth-order routes: a global compact (Padé) scheme and
//! explicit seven-point central differences with eight-point one-sided
//! stencils near the ends. Agreement between them is the accuracy check used
//! when turning gap probabilities into spacing densities.

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;

/// Fewest samples either route accepts.
pub const MIN_SAMPLES: usize = 8;

// f''_0 + 126/11 f''_1 = sum c_j f_j / h^2, exact through degree 7.
const CLOSURE_COUPLING: f64 = 126.0 / 11.0;
const CLOSURE: [f64; 7] = [
    13097.0 / 990.0,
    -2943.0 / 110.0,
    573.0 / 44.0,
    167.0 / 99.0,
    -18.0 / 11.0,
    57.0 / 110.0,
    -131.0 / 1980.0,
];

// One-sided stencils (times 1/(180 h^2)) for the first three points.
const EDGE: [[f64; 8]; 3] = [
    [938.0, -4014.0, 7911.0, -9490.0, 7380.0, -3618.0, 1019.0, -126.0],
    [126.0, -70.0, -486.0, 855.0, -670.0, 324.0, -90.0, 11.0],
    [-11.0, 214.0, -378.0, 130.0, 85.0, -54.0, 16.0, -2.0],
];
const CENTRAL: [f64; 7] = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0];

fn check(f: &[f64], h: f64) -> Result<()> {
    if f.len() < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SAMPLES} samples to differentiate, got {}",
            f.len()
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("sample spacing must be > 0, got {h}")));
    }
    Ok(())
}

/// Compact scheme
/// `2/11 f''_{i-1} + f''_i + 2/11 f''_{i+1} = 12/11 d1_i + 3/11 d2_i`
/// with `d1 = (f_{i+1} - 2 f_i + f_{i-1}) / h^2` and
/// `d2 = (f_{i+2} - 2 f_i + f_{i-2}) / (4 h^2)`. The second and penultimate
/// rows use the fourth-order `1/10, 6/5` relation; the end rows use a
/// seven-point closure.
pub fn compact_second_derivative(f: &[f64], h: f64) -> Result<Vec<f64>> {
    check(f, h)?;
    let n = f.len();
    let h2 = h * h;
    let mut lower = vec![0.0; n];
    let diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    let d1 = |i: usize| (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    for i in 2..n - 2 {
        let d2 = (f[i + 2] - 2.0 * f[i] + f[i - 2]) / (4.0 * h2);
        lower[i] = 2.0 / 11.0;
        upper[i] = 2.0 / 11.0;
        rhs[i] = 12.0 / 11.0 * d1(i) + 3.0 / 11.0 * d2;
    }
    for i in [1, n - 2] {
        lower[i] = 0.1;
        upper[i] = 0.1;
        rhs[i] = 1.2 * d1(i);
    }
    let closure = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        CLOSURE.iter().zip(vals).map(|(c, v)| c * v).sum::<f64>() / h2
    };
    upper[0] = CLOSURE_COUPLING;
    rhs[0] = closure(&mut f.iter().copied());
    lower[n - 1] = CLOSURE_COUPLING;
    rhs[n - 1] = closure(&mut f.iter().rev().copied());
    Ok(solve_tridiagonal(&lower, &diag, &upper, &rhs))
}

/// Explicit sixth-order finite differences.
pub fn central_second_derivative(f: &[f64], h: f64) -> Result<Vec<f64>> {
    check(f, h)?;
    let n = f.len();
    let scale = 1.0 / (180.0 * h * h);
    let mut out = vec![0.0; n];
    for i in 3..n - 3 {
        out[i] = CENTRAL
            .iter()
            .zip(&f[i - 3..=i + 3])
            .map(|(c, v)| c * v)
            .sum::<f64>()
            * scale;
    }
    for (k, coef) in EDGE.iter().enumerate() {
        out[k] = coef.iter().zip(f.iter()).map(|(c, v)| c * v).sum::<f64>() * scale;
        out[n - 1 - k] = coef.iter().zip(f.iter().rev()).map(|(c, v)| c * v).sum::<f64>() * scale;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> f64, n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| f(i as f64 * h)).collect()
    }

    #[test]
    fn exact_on_low_degree_polynomials() {
        let h = 0.01;
        let vals = sample(|x| 3.0 - 2.0 * x + 0.5 * x * x - x.powi(3), 101, h);
        for route in [compact_second_derivative, central_second_derivative] {
            let d = route(&vals, h).unwrap();
            for (i, v) in d.iter().enumerate() {
                let x = i as f64 * h;
                assert!((v - (1.0 - 6.0 * x)).abs() < 1e-8, "{i}: {v}");
            }
        }
    }

    #[test]
    fn high_order_on_smooth_function() {
        for route in [compact_second_derivative, central_second_derivative] {
            let err = |h: f64| {
                let n = (3.0 / h).round() as usize + 1;
                let d = route(&sample(|x| (1.3 * x).sin(), n, h), h).unwrap();
                d.iter()
                    .enumerate()
                    .map(|(i, v)| (v + 1.69 * (1.3 * i as f64 * h).sin()).abs())
                    .fold(0.0, f64::max)
            };
            let (e1, e2) = (err(0.1), err(0.05));
            assert!(e1 / e2 > 14.0, "order too low: {e1} / {e2}");
        }
    }

    #[test]
    fn routes_agree_on_sharp_feature_with_ghost_points() {
        // Feature of width 0.05 at the left end, sampled from -4h so the
        // one-sided stencils only act on discarded points.
        let h = 0.01;
        let f = |x: f64| x * x * x * (1.0 - (-x / 0.05f64).exp()) / 6.0;
        let vals: Vec<f64> = (-4..=600).map(|i| f(i as f64 * h)).collect();
        let a = compact_second_derivative(&vals, h).unwrap().split_off(4);
        let b = central_second_derivative(&vals, h).unwrap().split_off(4);
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn too_few_samples() {
        assert!(compact_second_derivative(&[1.0; 7], 0.1).is_err());
        assert!(central_second_derivative(&[1.0; 8], 0.0).is_err());
    }
}
