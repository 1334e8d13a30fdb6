//! Integral-operator kernels for the bulk spacing statistics.
//!
//! The scalar kernels are the sine kernel and its even/odd projections onto
//! the half line. The GOE-GUE crossover uses the 2x2 block (Pandey-Mehta)
//! kernel
//!
//! ```text
//! K(x, y) = [[S(r), D(r)], [I(r), S(r)]],   r = x - y
//! S(r) = sin(pi r) / (pi r)
//! D(r) = (1/pi) int_0^pi  k exp( 2 rho^2 k^2) sin(k r) dk
//! I(r) = (1/pi) int_pi^oo k^-1 exp(-2 rho^2 k^2) sin(k r) dk
//! ```
//!
//! `D` grows like `exp(2 rho^2 pi^2)` and `I` decays at the same rate, so the
//! evaluation works in a balanced gauge `D~ = D e^{-g}`, `I~ = I e^{g}` with
//! `g = 2 rho^2 pi^2`. The block determinant is invariant under this
//! conjugation, so the Fredholm code never sees the raw factors.
//!
//! `I` is evaluated in one of two forms:
//!
//! * small `rho`: `I(r) = erf(r / (2 sqrt2 rho)) / 2 - (1/pi) int_0^pi k^-1 exp(-2 rho^2 k^2) sin(k r) dk`,
//!   a finite smooth integral plus a closed-form step;
//! * large `rho`: the tail integral over `k = pi + t`, truncated where the
//!   Gaussian factor drops below `e^-40`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::special::{erf, sine_integral, sinc_pi};

/// Largest `rho` accepted by the raw-gauge [`dynamical_kernel`].
pub const RHO_RAW_CAP: f64 = 1.5;

/// Below this `rho` the erf form of `I` is used.
const RHO_ERF_FORM_MAX: f64 = 0.35;

/// Exponent at which integrands are truncated (`e^-40 ~ 4e-18`).
const TRUNCATION_EXPONENT: f64 = 40.0;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Mean spacing of the unperturbed 2x2 GOE matrix, `sqrt(pi)`.
pub const GOE_2X2_MEAN_SPACING: f64 = 1.772_453_850_905_516;

/// Sine kernel `sin(pi(x-y)) / (pi(x-y))`.
#[inline]
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    sinc_pi(x - y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// `K_+-(x, y) = S(x - y) +- S(x + y)`.
#[inline]
pub fn sine_kernel_projected(x: f64, y: f64, parity: Parity) -> f64 {
    match parity {
        Parity::Even => sinc_pi(x - y) + sinc_pi(x + y),
        Parity::Odd => sinc_pi(x - y) - sinc_pi(x + y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Sine,
    SineEven,
    SineOdd,
    DynamicalSine,
}

impl KernelKind {
    pub fn block_size(self) -> usize {
        match self {
            KernelKind::DynamicalSine => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Sine => "sine",
            KernelKind::SineEven => "sine_even",
            KernelKind::SineOdd => "sine_odd",
            KernelKind::DynamicalSine => "dynamical_sine",
        }
    }
}

/// Which kernel an integral operator uses. `rho` is present iff the kind is
/// [`KernelKind::DynamicalSine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    kind: KernelKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rho: Option<f64>,
}

impl KernelSpec {
    pub const SINE: KernelSpec = KernelSpec {
        kind: KernelKind::Sine,
        rho: None,
    };
    pub const SINE_EVEN: KernelSpec = KernelSpec {
        kind: KernelKind::SineEven,
        rho: None,
    };
    pub const SINE_ODD: KernelSpec = KernelSpec {
        kind: KernelKind::SineOdd,
        rho: None,
    };

    pub fn dynamical(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(KernelSpec {
            kind: KernelKind::DynamicalSine,
            rho: Some(rho),
        })
    }

    pub fn projected(parity: Parity) -> Self {
        match parity {
            Parity::Even => Self::SINE_EVEN,
            Parity::Odd => Self::SINE_ODD,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn block_size(&self) -> usize {
        self.kind.block_size()
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.rho {
            Some(rho) => write!(f, "{}(rho={rho})", self.kind.name()),
            None => f.write_str(self.kind.name()),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::invalid(format!(
            "crossover parameter rho must be finite and > 0 (got {rho}); \
             request the GOE limit through the even/odd projected kernels"
        )));
    }
    Ok(())
}

/// Crossover strength. `rho` is the single source of truth; the spacing
/// rescaled strength `Lambda = sqrt(2 pi) rho` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverParam {
    rho: f64,
}

impl CrossoverParam {
    pub fn from_rho(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::invalid(format!("rho must be >= 0, got {rho}")));
        }
        Ok(CrossoverParam { rho })
    }

    pub fn from_lambda_big(lambda_big: f64) -> Result<Self> {
        Ok(CrossoverParam {
            rho: lambda_big_to_rho(lambda_big)?,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda_big(&self) -> f64 {
        rho_to_lambda_big(self.rho)
    }
}

pub fn lambda_big_to_rho(lambda_big: f64) -> Result<f64> {
    if !lambda_big.is_finite() || lambda_big < 0.0 {
        return Err(Error::invalid(format!(
            "Lambda must be finite and >= 0, got {lambda_big}"
        )));
    }
    Ok(lambda_big / SQRT_2PI)
}

pub fn rho_to_lambda_big(rho: f64) -> f64 {
    rho * SQRT_2PI
}

/// `Lambda = (mean_spacing_2x2 / delta) * alpha`.
pub fn effective_lambda_big(alpha: f64, mean_spacing_2x2: f64, delta: f64) -> Result<f64> {
    if !(alpha.is_finite() && mean_spacing_2x2.is_finite() && delta.is_finite()) {
        return Err(Error::invalid("effective_lambda_big: non-finite input"));
    }
    if alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    if mean_spacing_2x2 <= 0.0 {
        return Err(Error::invalid("mean 2x2 spacing must be > 0"));
    }
    if delta <= 0.0 {
        return Err(Error::invalid(format!(
            "mean level spacing delta must be > 0, got {delta}"
        )));
    }
    Ok(mean_spacing_2x2 / delta * alpha)
}

/// One evaluation of the block kernel `[[s, d], [i, s]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block2 {
    pub s: f64,
    pub d: f64,
    pub i: f64,
}

impl Block2 {
    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.s, self.d], [self.i, self.s]]
    }
}

/// Raw-gauge block kernel at `(x, y)`.
pub fn dynamical_kernel(x: f64, y: f64, rho: f64) -> Result<Block2> {
    check_rho(rho)?;
    if rho > RHO_RAW_CAP {
        return Err(Error::invalid(format!(
            "raw-gauge dynamical kernel supports rho <= {RHO_RAW_CAP} (got {rho}); \
             use DynamicalKernel::balanced for larger values"
        )));
    }
    let r = x - y;
    let kernel = DynamicalKernel::new(rho, r.abs().max(1.0))?;
    Ok(kernel.raw(r))
}

/// `I` at `rho = 0`: `sgn(r)/2 - Si(pi r)/pi`.
pub fn i_kernel_goe_limit(r: f64) -> f64 {
    let step = if r > 0.0 {
        0.5
    } else if r < 0.0 {
        -0.5
    } else {
        0.0
    };
    step - sine_integral(PI * r) / PI
}

/// A Gauss-Legendre sum `sum_q c_q sin(k_q r)` standing in for one of the
/// Fourier-type integrals.
#[derive(Debug, Clone)]
struct SineSum {
    k: Vec<f64>,
    c: Vec<f64>,
}

impl SineSum {
    fn eval(&self, r: f64) -> f64 {
        self.k
            .iter()
            .zip(&self.c)
            .map(|(&k, &c)| c * (k * r).sin())
            .sum()
    }

    /// Build on `[lo, lo + len]` with `integrand(k) * sin(k r)`, doubling the
    /// order until the sum is stable on `[0, r_max]`.
    fn adaptive<F: Fn(f64) -> f64>(lo: f64, len: f64, r_max: f64, integrand: F) -> Result<Self> {
        let build = |q: usize| -> Result<SineSum> {
            let rule = gauss_legendre_on(q, lo, lo + len)?;
            let k = rule.nodes().to_vec();
            let c = rule.iter().map(|(k, w)| w * integrand(k)).collect();
            Ok(SineSum { k, c })
        };
        let probes: Vec<f64> = (1..=16).map(|j| r_max * j as f64 / 16.0).collect();
        let mut q = 16;
        let mut current = build(q)?;
        let mut previous_diff = f64::INFINITY;
        while q < 4096 {
            let next = build(2 * q)?;
            let scale = probes
                .iter()
                .map(|&r| next.eval(r).abs())
                .fold(1e-300, f64::max);
            let diff = probes
                .iter()
                .map(|&r| (next.eval(r) - current.eval(r)).abs())
                .fold(0.0, f64::max);
            current = next;
            q *= 2;
            // Two successive doublings agreeing.
            if diff <= 1e-12 * scale.max(1e-3) && previous_diff <= 1e-10 * scale.max(1e-3) {
                return Ok(current);
            }
            previous_diff = diff;
        }
        Err(Error::Numerical(format!(
            "kernel quadrature did not converge on [{lo}, {}] for r_max = {r_max}",
            lo + len
        )))
    }
}

/// The block kernel at fixed `rho`, with its `k`-quadratures prepared for
/// `|r| <= r_max`.
#[derive(Debug, Clone)]
pub struct DynamicalKernel {
    rho: f64,
    r_max: f64,
    log_gauge: f64,
    d_sum: SineSum,
    i_form: IForm,
}

#[derive(Debug, Clone)]
enum IForm {
    /// `e^g [erf(r / (2 sqrt2 rho)) / 2 - sum]`
    Erf { sum: SineSum, gauge: f64, erf_scale: f64 },
    /// Balanced tail sum evaluated directly.
    Tail { sum: SineSum },
}

impl DynamicalKernel {
    pub fn new(rho: f64, r_max: f64) -> Result<Self> {
        check_rho(rho)?;
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::invalid(format!("r_max must be > 0, got {r_max}")));
        }
        let two_rho2 = 2.0 * rho * rho;
        let log_gauge = two_rho2 * PI * PI;

        // D~: k = pi - t, factor exp(-2 rho^2 t (2 pi - t)).
        let t_d = truncation_point_d(two_rho2);
        let d_sum = SineSum::adaptive(PI - t_d, t_d, r_max, |k| {
            let t = PI - k;
            k * (-two_rho2 * t * (2.0 * PI - t)).exp() / PI
        })?;

        let i_form = if rho <= RHO_ERF_FORM_MAX {
            let sum = SineSum::adaptive(0.0, PI, r_max, |k| (-two_rho2 * k * k).exp() / (PI * k))?;
            IForm::Erf {
                sum,
                gauge: log_gauge.exp(),
                erf_scale: 1.0 / (2.0 * std::f64::consts::SQRT_2 * rho),
            }
        } else {
            let t_i = truncation_point(two_rho2);
            let sum = SineSum::adaptive(PI, t_i, r_max, |k| {
                let t = k - PI;
                (-two_rho2 * t * (t + 2.0 * PI)).exp() / (PI * k)
            })?;
            IForm::Tail { sum }
        };

        Ok(DynamicalKernel {
            rho,
            r_max,
            log_gauge,
            d_sum,
            i_form,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `g = 2 rho^2 pi^2`; raw `D = e^g D~`, raw `I = e^-g I~`.
    pub fn log_gauge(&self) -> f64 {
        self.log_gauge
    }

    pub fn d_balanced(&self, r: f64) -> f64 {
        self.d_sum.eval(r)
    }

    pub fn i_balanced(&self, r: f64) -> f64 {
        match &self.i_form {
            IForm::Erf {
                sum,
                gauge,
                erf_scale,
            } => gauge * (0.5 * erf(r * erf_scale) - sum.eval(r)),
            IForm::Tail { sum } => sum.eval(r),
        }
    }

    /// Balanced-gauge block at separation `r`.
    pub fn balanced(&self, r: f64) -> Block2 {
        Block2 {
            s: sinc_pi(r),
            d: self.d_balanced(r),
            i: self.i_balanced(r),
        }
    }

    /// Raw-gauge block at separation `r`. Overflows for large `rho`.
    pub fn raw(&self, r: f64) -> Block2 {
        let g = self.log_gauge;
        Block2 {
            s: sinc_pi(r),
            d: self.d_balanced(r) * g.exp(),
            i: self.i_balanced(r) * (-g).exp(),
        }
    }

    /// Off-diagonal blocks `(D~_ij, I~_ij)` at `r = x_i - x_j`, row-major
    /// `n x n`, in the balanced gauge.
    ///
    /// Uses `sin(k(x_i - x_j)) = sin(k x_i) cos(k x_j) - cos(k x_i) sin(k x_j)`
    /// so the trigonometric work is linear in `n`.
    pub fn off_diagonal_blocks(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let d = separable_sine_matrix(&self.d_sum, x);
        let i = match &self.i_form {
            IForm::Erf {
                sum,
                gauge,
                erf_scale,
            } => {
                let mut m = separable_sine_matrix(sum, x);
                for a in 0..n {
                    for b in 0..n {
                        let idx = a * n + b;
                        m[idx] = gauge * (0.5 * erf((x[a] - x[b]) * erf_scale) - m[idx]);
                    }
                }
                m
            }
            IForm::Tail { sum } => separable_sine_matrix(sum, x),
        };
        (d, i)
    }
}

/// Smallest `t` with `two_rho2 * t * (t + 2 pi) >= TRUNCATION_EXPONENT`.
fn truncation_point(two_rho2: f64) -> f64 {
    // t^2 + 2 pi t - E / (2 rho^2) = 0
    let c = TRUNCATION_EXPONENT / two_rho2;
    -PI + (PI * PI + c).sqrt()
}

/// Smallest `t` in `[0, pi]` with `two_rho2 * t * (2 pi - t) >= TRUNCATION_EXPONENT`,
/// or `pi` when the factor never gets that small.
fn truncation_point_d(two_rho2: f64) -> f64 {
    let c = TRUNCATION_EXPONENT / two_rho2;
    if c >= PI * PI {
        PI
    } else {
        PI - (PI * PI - c).sqrt()
    }
}

/// `M_ab = sum_q c_q sin(k_q (x_a - x_b))`, antisymmetric.
fn separable_sine_matrix(sum: &SineSum, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let q = sum.k.len();
    let mut sin_t = vec![0.0; n * q];
    let mut cos_t = vec![0.0; n * q];
    for (a, &xa) in x.iter().enumerate() {
        for (j, &k) in sum.k.iter().enumerate() {
            let (s, c) = (k * xa).sin_cos();
            sin_t[a * q + j] = s * sum.c[j];
            cos_t[a * q + j] = c;
        }
    }
    let mut m = vec![0.0; n * n];
    for a in 0..n {
        let sa = &sin_t[a * q..(a + 1) * q];
        let ca = &cos_t[a * q..(a + 1) * q];
        for b in 0..a {
            let sb = &sin_t[b * q..(b + 1) * q];
            let cb = &cos_t[b * q..(b + 1) * q];
            // c_q [sin(k x_a) cos(k x_b) - cos(k x_a) sin(k x_b)]
            let v: f64 = (0..q).map(|j| sa[j] * cb[j] - ca[j] * sb[j]).sum();
            m[a * n + b] = v;
            m[b * n + a] = -v;
        }
    }
    m
}
