//! Special functions needed by the kernels and closed-form densities.

use std::f64::consts::{FRAC_PI_2, PI};

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `sin(pi x) / (pi x)` with the removable singularity filled in.
#[inline]
pub fn sinc_pi(x: f64) -> f64 {
    let t = PI * x;
    if t.abs() < 1e-4 {
        // Taylor to t^4: relative error below 1e-18 on this range.
        let t2 = t * t;
        1.0 - t2 / 6.0 * (1.0 - t2 / 20.0)
    } else {
        t.sin() / t
    }
}

/// Sine integral `Si(x) = int_0^x sin(t)/t dt`.
///
/// Power series for `|x| <= 2`, continued fraction for the complex
/// exponential integral `E1(ix)` beyond that.
pub fn sine_integral(x: f64) -> f64 {
    let t = x.abs();
    let value = if t == 0.0 {
        0.0
    } else if t <= 2.0 {
        si_series(t)
    } else {
        si_continued_fraction(t)
    };
    value.copysign(x)
}

fn si_series(t: f64) -> f64 {
    let t2 = t * t;
    let mut term = t; // t^(2n+1) / (2n+1)!
    let mut sum = t;
    for n in 1..40 {
        let k = (2 * n) as f64;
        term *= -t2 / (k * (k + 1.0));
        let add = term / (k + 1.0);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn si_continued_fraction(t: f64) -> f64 {
    // Modified Lentz evaluation of E1(it) e^{it}; complex numbers as (re, im).
    const TINY: f64 = 1e-300;
    let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let inv = |a: (f64, f64)| {
        let n = a.0 * a.0 + a.1 * a.1;
        (a.0 / n, -a.1 / n)
    };
    let mut b = (1.0, t);
    let mut c = (1.0 / TINY, 0.0);
    let mut d = inv(b);
    let mut h = d;
    for i in 1..1000 {
        let a = -((i * i) as f64);
        b.0 += 2.0;
        d = inv((a * d.0 + b.0, a * d.1 + b.1));
        let ic = inv(c);
        c = (b.0 + a * ic.0, b.1 + a * ic.1);
        let del = mul(c, d);
        h = mul(h, del);
        if (del.0 - 1.0).abs() + del.1.abs() < 1e-16 {
            break;
        }
    }
    let h = mul((t.cos(), -t.sin()), h);
    FRAC_PI_2 + h.1
}
