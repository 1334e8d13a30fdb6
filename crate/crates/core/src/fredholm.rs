//! Nyström evaluation of Fredholm determinants and the resulting gap
//! probabilities `E(s)` and spacing densities `P(s) = E''(s)`.
//!
//! With Gauss-Legendre nodes `x_i` and weights `w_i` on `[0, s]`,
//!
//! ```text
//! Det(I - K_s) ~ det[ delta_ij - K(x_i, x_j) sqrt(w_i w_j) ]
//! ```
//!
//! For the 2x2 block kernel the matrix is `2m x 2m` and the gap probability
//! is the square root of the determinant (Pfaffian convention): the block
//! determinant tends to the square of the sine-kernel determinant as the
//! off-diagonal blocks vanish.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{sine_kernel, sine_kernel_projected, DynamicalKernel, KernelKind, KernelSpec, Parity};
use crate::linalg::log_det_in_place;
use crate::numdiff::{central_second_derivative, compact_second_derivative};
use crate::parallel::map_collect;
use crate::quadrature::{gauss_legendre, QuadratureRule};

/// Quadrature order used for curves destined for fitting.
pub const DEFAULT_M: usize = 200;
/// Default grid end point.
pub const DEFAULT_S_MAX: f64 = 6.0;
/// Default grid step.
pub const DEFAULT_DS: f64 = 0.01;
/// Coarsest grid step accepted by [`gap_to_lsd`].
pub const MAX_LSD_STEP: f64 = 0.02;
/// Required sup-norm agreement of the two differentiation routes.
pub const DERIVATIVE_AGREEMENT: f64 = 1e-5;
/// Number of points at `s = -h, -2h, ...` tabulated alongside a uniform grid.
pub const GHOST_POINTS: usize = 4;
/// Slack allowed on the monotone decrease of `E`.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Strictly increasing abscissae starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// `{0, ds, 2 ds, ..., s_max}`; each point is `i * ds`, not a running sum.
    pub fn uniform(s_max: f64, ds: f64) -> Result<Grid> {
        if !(ds.is_finite() && ds > 0.0) || !(s_max.is_finite() && s_max > 0.0) {
            return Err(Error::invalid(format!(
                "grid needs s_max > 0 and ds > 0, got s_max = {s_max}, ds = {ds}"
            )));
        }
        let n = (s_max / ds).round() as usize;
        if n == 0 || n > 10_000_000 {
            return Err(Error::invalid(format!("unsupported grid size {n}")));
        }
        Ok(Grid {
            points: (0..=n).map(|i| i as f64 * ds).collect(),
        })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Grid> {
        if points.first() != Some(&0.0) {
            return Err(Error::invalid("grid must start at s = 0"));
        }
        if !points.windows(2).all(|w| w[0] < w[1]) || points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("grid must be finite and strictly increasing"));
        }
        Ok(Grid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn s_max(&self) -> f64 {
        *self.points.last().unwrap_or(&0.0)
    }

    /// Common step if the grid is uniform to 1e-9 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let h = self.s_max() / (self.points.len() - 1) as f64;
        let uniform = self
            .points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        uniform.then_some(h)
    }

    /// Hex digest of the exact bit patterns of the points.
    pub fn hash_hex(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.points {
            hasher.update(p.to_bits().to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..12])
    }
}

/// How a gap probability is assembled from determinants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    /// `E(s) = Det(I - K_s)` (scalar kernels).
    Det,
    /// `E(s) = sqrt(Det(I - K_s))` (2x2 block kernel).
    SqrtDet,
    /// `E_1(s) = Det(I - K_+)` on `[0, s/2]`.
    EvenHalfInterval,
    /// `E_4(s) = (Det(I - K_+) + Det(I - K_-)) / 2` on `[0, s]`.
    EvenOddMean,
}

/// What a curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurveSource {
    Kernel { kernel: KernelSpec },
    PureClass { beta: u8 },
}

impl CurveSource {
    pub fn assembly(&self) -> Assembly {
        match self {
            CurveSource::Kernel { kernel } if kernel.kind() == KernelKind::DynamicalSine => {
                Assembly::SqrtDet
            }
            CurveSource::Kernel { .. } => Assembly::Det,
            CurveSource::PureClass { beta: 1 } => Assembly::EvenHalfInterval,
            CurveSource::PureClass { beta: 4 } => Assembly::EvenOddMean,
            CurveSource::PureClass { .. } => Assembly::Det,
        }
    }

    /// Stable identifier used in cache keys, with `rho` rounded to 1e-12.
    pub fn key_fragment(&self) -> String {
        match self {
            CurveSource::Kernel { kernel } => match kernel.rho() {
                Some(rho) => format!(
                    "{}:rho={}e-12",
                    kernel.kind().name(),
                    (rho * 1e12).round() as i128
                ),
                None => kernel.kind().name().to_string(),
            },
            CurveSource::PureClass { beta } => format!("pure_beta{beta}"),
        }
    }
}

impl std::fmt::Display for CurveSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveSource::Kernel { kernel } => write!(f, "{kernel}"),
            CurveSource::PureClass { beta } => write!(f, "pure beta={beta}"),
        }
    }
}

/// Prepared Nyström operator for one kernel and quadrature order.
#[derive(Debug, Clone)]
pub struct NystromOperator {
    kernel: KernelSpec,
    reference: QuadratureRule,
    dynamical: Option<DynamicalKernel>,
}

impl NystromOperator {
    /// `s_max` bounds the interval lengths this operator will be asked for.
    pub fn new(kernel: KernelSpec, m: usize, s_max: f64) -> Result<Self> {
        let reference = gauss_legendre(m)?;
        let dynamical = match kernel.kind() {
            KernelKind::DynamicalSine => {
                let rho = kernel.rho().ok_or_else(|| Error::invalid("dynamical kernel without rho"))?;
                Some(DynamicalKernel::new(rho, s_max.max(1.0))?)
            }
            _ => None,
        };
        Ok(NystromOperator {
            kernel,
            reference,
            dynamical,
        })
    }

    pub fn m(&self) -> usize {
        self.reference.order()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// `det[delta_ij - K(x_i, x_j) sqrt(w_i w_j)]` on `[0, s]`.
    ///
    /// Negative `s` gives the analytic continuation (the interval is traversed
    /// backwards, so the weights change sign); it is used for ghost points when
    /// differentiating at `s = 0`.
    pub fn det(&self, s: f64) -> Result<f64> {
        let m = self.m();
        if !s.is_finite() {
            return Err(Error::invalid(format!("interval length must be finite, got {s}")));
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        let x: Vec<f64> = self.reference.nodes().iter().map(|t| t * s).collect();
        // A negative weight sign is carried by one of the two square roots.
        let sw: Vec<f64> = self.reference.weights().iter().map(|w| (w * s.abs()).sqrt()).collect();
        let sign = s.signum();

        let (mut a, n) = match self.kernel.kind() {
            KernelKind::Sine => (scalar_matrix(&x, &sw, |a, b| sign * sine_kernel(a, b)), m),
            KernelKind::SineEven => (
                scalar_matrix(&x, &sw, |a, b| sign * sine_kernel_projected(a, b, Parity::Even)),
                m,
            ),
            KernelKind::SineOdd => (
                scalar_matrix(&x, &sw, |a, b| sign * sine_kernel_projected(a, b, Parity::Odd)),
                m,
            ),
            KernelKind::DynamicalSine => {
                let dk = self.dynamical.as_ref().expect("prepared in new");
                if s.abs() > dk.r_max() * (1.0 + 1e-12) {
                    return Err(Error::invalid(format!(
                        "operator prepared for s <= {}, asked for s = {s}",
                        dk.r_max()
                    )));
                }
                (block_matrix(dk, &x, &sw, sign), 2 * m)
            }
        };
        let ld = log_det_in_place(&mut a, n);
        let value = ld.value();
        if !value.is_finite() {
            return Err(Error::Determinant {
                s,
                m,
                reason: format!("non-finite determinant (sign {}, log {})", ld.sign, ld.log_abs),
            });
        }
        Ok(value)
    }

    /// Gap probability for this kernel on an interval of length `s`.
    pub fn gap(&self, s: f64) -> Result<f64> {
        let det = self.det(s)?;
        match self.kernel.kind() {
            KernelKind::DynamicalSine => {
                if det < 0.0 {
                    return Err(Error::Determinant {
                        s,
                        m: self.m(),
                        reason: format!("negative block determinant {det:e}"),
                    });
                }
                Ok(det.sqrt())
            }
            _ => Ok(det),
        }
    }
}

fn scalar_matrix<F: Fn(f64, f64) -> f64>(x: &[f64], sw: &[f64], k: F) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = -k(x[i], x[j]) * sw[i] * sw[j];
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
        a[i * n + i] += 1.0;
    }
    a
}

fn block_matrix(dk: &DynamicalKernel, x: &[f64], sw: &[f64], sign: f64) -> Vec<f64> {
    let m = x.len();
    let n = 2 * m;
    let (d, ib) = dk.off_diagonal_blocks(x);
    let mut a = vec![0.0; n * n];
    for i in 0..m {
        for j in 0..m {
            let w = sign * sw[i] * sw[j];
            let s = -sine_kernel(x[i], x[j]) * w;
            a[i * n + j] = s;
            a[(m + i) * n + m + j] = s;
            a[i * n + m + j] = -d[i * m + j] * w;
            a[(m + i) * n + j] = -ib[i * m + j] * w;
        }
        a[i * n + i] += 1.0;
        a[(m + i) * n + m + i] += 1.0;
    }
    a
}

/// Determinant of the discretized operator for one of the named kernels.
pub fn nystrom_det(kernel: &KernelSpec, s: f64, m: usize) -> Result<f64> {
    NystromOperator::new(*kernel, m, s)?.det(s)
}

/// Nyström determinant for an arbitrary scalar kernel on `[0, s]`.
pub fn nystrom_det_with<F: Fn(f64, f64) -> f64>(kernel: F, s: f64, m: usize) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::invalid(format!("interval length must be >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    let rule = gauss_legendre(m)?.rescale(0.0, s)?;
    let sw: Vec<f64> = rule.weights().iter().map(|w| w.sqrt()).collect();
    let mut a = scalar_matrix(rule.nodes(), &sw, kernel);
    Ok(log_det_in_place(&mut a, m).value())
}

/// Evaluates `E(s)` for any [`CurveSource`].
#[derive(Debug, Clone)]
pub struct GapFunction {
    source: CurveSource,
    primary: NystromOperator,
    secondary: Option<NystromOperator>,
}

impl GapFunction {
    pub fn new(source: CurveSource, m: usize, s_max: f64) -> Result<Self> {
        let (primary, secondary) = match source {
            CurveSource::Kernel { kernel } => (NystromOperator::new(kernel, m, s_max)?, None),
            CurveSource::PureClass { beta: 1 } => {
                (NystromOperator::new(KernelSpec::SINE_EVEN, m, s_max)?, None)
            }
            CurveSource::PureClass { beta: 2 } => {
                (NystromOperator::new(KernelSpec::SINE, m, s_max)?, None)
            }
            CurveSource::PureClass { beta: 4 } => (
                NystromOperator::new(KernelSpec::SINE_EVEN, m, s_max)?,
                Some(NystromOperator::new(KernelSpec::SINE_ODD, m, s_max)?),
            ),
            CurveSource::PureClass { beta } => {
                return Err(Error::invalid(format!("beta must be 1, 2 or 4, got {beta}")))
            }
        };
        Ok(GapFunction {
            source,
            primary,
            secondary,
        })
    }

    pub fn source(&self) -> CurveSource {
        self.source
    }

    pub fn m(&self) -> usize {
        self.primary.m()
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        match self.source.assembly() {
            Assembly::Det | Assembly::SqrtDet => self.primary.gap(s),
            Assembly::EvenHalfInterval => self.primary.det(0.5 * s),
            Assembly::EvenOddMean => {
                let odd = self.secondary.as_ref().expect("prepared in new");
                Ok(0.5 * (self.primary.det(s)? + odd.det(s)?))
            }
        }
    }
}

/// Tabulated gap probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub source: CurveSource,
    pub assembly: Assembly,
    pub m: usize,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Spacing variable rescale applied (1 unless unit-mean normalization moved it).
    #[serde(default = "one")]
    pub spacing_scale: f64,
    /// Analytic continuation `E(-h), E(-2h), ...` for uniform grids, so the
    /// second derivative at `s = 0` can use centred differences. May be empty.
    #[serde(default)]
    pub ghosts: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl GapCurve {
    pub fn cache_key(&self) -> String {
        curve_cache_key(&self.source, self.m, &self.grid)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.values.first() != Some(&1.0) {
            return Err(Error::Numerical(format!("E(0) = {:?}, expected 1", self.values.first())));
        }
        for (i, (&s, &e)) in self.grid.points().iter().zip(&self.values).enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Determinant {
                    s,
                    m: self.m,
                    reason: format!("gap probability {e:e} outside [0, 1]"),
                });
            }
            if i > 0 && e > self.values[i - 1] + MONOTONE_SLACK {
                return Err(Error::Determinant {
                    s,
                    m: self.m,
                    reason: format!(
                        "gap probability increased from {:e} to {e:e}",
                        self.values[i - 1]
                    ),
                });
            }
        }
        Ok(())
    }
}

impl GapCurve {
    /// Re-evaluate the grid points `indices` exactly as they were produced
    /// (same operator construction, same rescale), for bit-identity checks.
    pub fn recompute(&self, indices: &[usize]) -> Result<Vec<f64>> {
        let mu = self.spacing_scale;
        let gap = GapFunction::new(self.source, self.m, self.grid.s_max() * mu.max(1.0))?;
        let points: Vec<f64> = indices
            .iter()
            .map(|&i| {
                self.grid.points().get(i).copied().ok_or_else(|| {
                    Error::invalid(format!("grid index {i} out of range ({} points)", self.grid.len()))
                })
            })
            .collect::<Result<_>>()?;
        eval_all(&points, |s| rescaled_gap(&gap, mu, s))
    }
}

pub fn curve_cache_key(source: &CurveSource, m: usize, grid: &Grid) -> String {
    let text = format!("{}|m={m}|grid={}", source.key_fragment(), grid.hash_hex());
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..16])
}

fn ghost_points(grid: &Grid) -> Vec<f64> {
    match grid.uniform_step() {
        Some(h) => (1..=GHOST_POINTS).map(|k| -(k as f64) * h).collect(),
        None => Vec::new(),
    }
}

fn eval_all(points: &[f64], f: impl Fn(f64) -> Result<f64> + Sync + Send) -> Result<Vec<f64>> {
    map_collect(points, |&s| f(s)).into_iter().collect()
}

/// Evaluate `E` on every grid point (independently, possibly in parallel).
pub fn tabulate(gap: &GapFunction, grid: &Grid) -> Result<GapCurve> {
    let curve = GapCurve {
        source: gap.source(),
        assembly: gap.source().assembly(),
        m: gap.m(),
        grid: grid.clone(),
        values: eval_all(grid.points(), |s| gap.eval(s))?,
        spacing_scale: 1.0,
        ghosts: eval_all(&ghost_points(grid), |s| gap.eval(s))?,
    };
    curve.check_invariants()?;
    Ok(curve)
}

/// `E(s)` of `kernel` on `grid` at quadrature order `m`.
pub fn gap_curve(kernel: &KernelSpec, grid: &Grid, m: usize) -> Result<GapCurve> {
    let gap = GapFunction::new(CurveSource::Kernel { kernel: *kernel }, m, grid.s_max())?;
    tabulate(&gap, grid)
}

/// `E(s)` for any source: kernels are tabulated directly, pure classes with
/// the unit-mean rescale.
pub fn source_gap_curve(source: &CurveSource, grid: &Grid, m: usize) -> Result<GapCurve> {
    match *source {
        CurveSource::Kernel { kernel } => gap_curve(&kernel, grid, m),
        CurveSource::PureClass { beta } => pure_class_gap_curve(beta, grid, m),
    }
}

/// Tabulated spacing density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsdCurve {
    pub source: CurveSource,
    pub assembly: Assembly,
    pub m: usize,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// `int P ds` over the grid (trapezoid).
    pub mass: f64,
    /// `int s P ds` over the grid (trapezoid).
    pub mean: f64,
    /// Sup-norm difference between the two differentiation routes.
    pub derivative_agreement: f64,
    pub spacing_scale: f64,
    pub gap_cache_key: String,
}

impl LsdCurve {
    /// Copy with values clipped at zero, for output files only.
    pub fn clipped_values(&self) -> Vec<f64> {
        self.values.iter().map(|&p| p.max(0.0)).collect()
    }

    pub fn step(&self) -> f64 {
        self.grid.uniform_step().unwrap_or(f64::NAN)
    }
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(s, v)| 0.5 * (s[1] - s[0]) * (v[0] + v[1]))
        .sum()
}

/// `P = E''`, computed by the compact scheme and cross-checked against
/// explicit central differences.
pub fn gap_to_lsd(curve: &GapCurve) -> Result<LsdCurve> {
    let h = curve.grid.uniform_step().ok_or_else(|| {
        Error::invalid("gap_to_lsd needs a uniform grid with spacing <= 0.02")
    })?;
    if h > MAX_LSD_STEP * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "grid too coarse for differentiation: spacing {h} exceeds the required {MAX_LSD_STEP}"
        )));
    }
    let ghosts = curve.ghosts.len();
    let extended: Vec<f64> = curve.ghosts.iter().rev().chain(&curve.values).copied().collect();
    let primary = compact_second_derivative(&extended, h)?.split_off(ghosts);
    let check = central_second_derivative(&extended, h)?.split_off(ghosts);
    let agreement = primary
        .iter()
        .zip(&check)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(agreement <= DERIVATIVE_AGREEMENT) {
        return Err(Error::Numerical(format!(
            "second-derivative routes disagree by {agreement:e} (> {DERIVATIVE_AGREEMENT:e}) for {}",
            curve.source
        )));
    }
    let s = curve.grid.points();
    let mass = trapezoid(s, &primary);
    let weighted: Vec<f64> = s.iter().zip(&primary).map(|(s, p)| s * p).collect();
    let mean = trapezoid(s, &weighted);
    Ok(LsdCurve {
        source: curve.source,
        assembly: curve.assembly,
        m: curve.m,
        grid: curve.grid.clone(),
        values: primary,
        mass,
        mean,
        derivative_agreement: agreement,
        spacing_scale: curve.spacing_scale,
        gap_cache_key: curve.cache_key(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub s: f64,
    pub m_low: usize,
    pub m_high: usize,
    pub e_low: f64,
    pub e_high: f64,
    pub rel_shift: f64,
}

/// Relative shifts `|E_high - E_low| / |E_high|` between consecutive orders.
pub fn convergence_report(
    source: &CurveSource,
    s_list: &[f64],
    m_list: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    if m_list.len() < 2 || !m_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("m list must be strictly increasing with length >= 2"));
    }
    let s_max = s_list.iter().copied().fold(1.0, f64::max);
    let mut rows = Vec::new();
    let ops = m_list
        .iter()
        .map(|&m| GapFunction::new(*source, m, s_max))
        .collect::<Result<Vec<_>>>()?;
    for &s in s_list {
        let values = map_collect(&ops, |op| op.eval(s))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        for k in 1..m_list.len() {
            let (lo, hi) = (values[k - 1], values[k]);
            rows.push(ConvergenceRow {
                s,
                m_low: m_list[k - 1],
                m_high: m_list[k],
                e_low: lo,
                e_high: hi,
                rel_shift: (hi - lo).abs() / hi.abs(),
            });
        }
    }
    Ok(rows)
}

/// Gap probability of the spacing variable rescaled by `mu`: `E~(s) = E(mu s)`.
/// If `E` has `E(0) = 1` and `-E'(0) = 1 / mu`, then `P~ = E~''` has unit
/// mass and unit mean.
fn rescaled_gap(gap: &GapFunction, mu: f64, s: f64) -> Result<f64> {
    gap.eval(mu * s)
}

/// Mean spacing `1 / (-E'(0))` implied by a gap curve (`mean = E(0) = 1` and
/// `mass = -E'(0)` after integrating by parts). Uses the centred sixth-order
/// first derivative across the ghost points, so it does not depend on how
/// much of the tail the grid covers.
fn implied_mean_spacing(curve: &GapCurve) -> Option<f64> {
    let h = curve.grid.uniform_step()?;
    if curve.ghosts.len() < 3 || curve.values.len() < 4 {
        return None;
    }
    let (f, g) = (&curve.values, &curve.ghosts);
    let slope = (45.0 * (f[1] - g[0]) - 9.0 * (f[2] - g[1]) + (f[3] - g[2])) / (60.0 * h);
    Some(-1.0 / slope)
}

/// Exact large-N spacing density of a pure class, normalized to unit mean.
pub fn pure_class_lsd(beta: u8, grid: &Grid, m: usize) -> Result<LsdCurve> {
    let gap = pure_class_gap_curve(beta, grid, m)?;
    gap_to_lsd(&gap)
}

/// Gap probability of a pure class with the spacing variable rescaled so the
/// density has unit mean (a no-op unless the implied mean spacing differs
/// from 1 by more than 1e-7).
pub fn pure_class_gap_curve(beta: u8, grid: &Grid, m: usize) -> Result<GapCurve> {
    if !matches!(beta, 1 | 2 | 4) {
        return Err(Error::invalid(format!("beta must be 1, 2 or 4, got {beta}")));
    }
    let source = CurveSource::PureClass { beta };
    let raw = tabulate(&GapFunction::new(source, m, grid.s_max())?, grid)?;
    let mu = match implied_mean_spacing(&raw) {
        Some(mu) if (mu - 1.0).abs() > 1e-7 => mu,
        _ => return Ok(raw),
    };
    let gap = GapFunction::new(source, m, grid.s_max() * mu.max(1.0))?;
    let rescaled = |s: f64| rescaled_gap(&gap, mu, s);
    let curve = GapCurve {
        values: eval_all(grid.points(), rescaled)?,
        ghosts: eval_all(&ghost_points(grid), rescaled)?,
        spacing_scale: mu,
        ..raw
    };
    curve.check_invariants()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn toy_curve(grid: Grid, f: impl Fn(f64) -> f64) -> GapCurve {
        GapCurve {
            source: CurveSource::Kernel {
                kernel: KernelSpec::SINE,
            },
            assembly: Assembly::Det,
            m: 1,
            values: grid.points().iter().map(|&s| f(s)).collect(),
            ghosts: ghost_points(&grid).into_iter().map(&f).collect(),
            grid,
            spacing_scale: 1.0,
        }
    }

    #[test]
    fn empty_interval_has_unit_determinant() {
        for kernel in [
            KernelSpec::SINE,
            KernelSpec::SINE_EVEN,
            KernelSpec::SINE_ODD,
            KernelSpec::dynamical(0.1).unwrap(),
        ] {
            assert_eq!(nystrom_det(&kernel, 0.0, 50).unwrap(), 1.0);
        }
    }

    #[test]
    fn constant_kernel_is_rank_one() {
        for m in [1, 3, 20] {
            for s in [0.25, 0.5, 0.9] {
                let d = nystrom_det_with(|_, _| 1.0, s, m).unwrap();
                assert!((d - (1.0 - s)).abs() < 1e-14, "m={m} s={s}: {d}");
                let d = nystrom_det_with(|_, _| 0.7, s, m).unwrap();
                assert!((d - (1.0 - 0.7 * s)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sine_kernel_converged_at_unit_interval() {
        let a = nystrom_det(&KernelSpec::SINE, 1.0, 100).unwrap();
        let b = nystrom_det(&KernelSpec::SINE, 1.0, 200).unwrap();
        assert!(((a - b) / b).abs() <= 1e-7);
    }

    #[test]
    fn block_determinant_is_square_of_gue_at_large_rho() {
        let gue = nystrom_det(&KernelSpec::SINE, 1.5, 60).unwrap();
        let block = nystrom_det(&KernelSpec::dynamical(10.0).unwrap(), 1.5, 60).unwrap();
        assert!((block - gue * gue).abs() < 1e-6 * gue * gue, "{block} vs {}", gue * gue);
        assert!((block - gue).abs() > 0.1 * gue);
    }

    #[test]
    fn gse_gap_identity_on_symmetric_interval() {
        // E_+(s) E_-(s) on [0, s/2] equals the sine-kernel determinant on [0, s].
        let s = 1.3;
        let even = nystrom_det(&KernelSpec::SINE_EVEN, s / 2.0, 60).unwrap();
        let odd = nystrom_det(&KernelSpec::SINE_ODD, s / 2.0, 60).unwrap();
        let full = nystrom_det(&KernelSpec::SINE, s, 60).unwrap();
        assert!((even * odd - full).abs() < 1e-13);
    }

    #[test]
    fn negative_interval_continues_small_s_series() {
        // E_2(s) = 1 - s + pi^2 s^4 / 36 - pi^4 s^6 / 675 + O(s^8)
        let op = NystromOperator::new(KernelSpec::SINE, 40, 1.0).unwrap();
        for s in [-0.01f64, -0.03] {
            let series = 1.0 - s + PI.powi(2) * s.powi(4) / 36.0 - PI.powi(4) * s.powi(6) / 675.0;
            assert!((op.det(s).unwrap() - series).abs() < 1e-12);
        }
        let dk = NystromOperator::new(KernelSpec::dynamical(0.1).unwrap(), 40, 1.0).unwrap();
        let (a, b) = (dk.gap(0.02).unwrap(), dk.gap(-0.02).unwrap());
        assert!((a + b - 2.0).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn grid_validation() {
        let g = Grid::uniform(4.0, 0.1).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g.points()[40], 4.0);
        assert!(g.uniform_step().is_some());
        assert!(Grid::from_points(vec![0.1, 0.2]).is_err());
        assert!(Grid::from_points(vec![0.0, 0.2, 0.2]).is_err());
        assert!(Grid::uniform(1.0, 0.0).is_err());
        assert_ne!(g.hash_hex(), Grid::uniform(4.0, 0.05).unwrap().hash_hex());
    }

    #[test]
    fn gap_curve_invariants_for_gue() {
        let grid = Grid::uniform(4.0, 0.1).unwrap();
        let c = gap_curve(&KernelSpec::SINE, &grid, 60).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!(c.values.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK));
        assert!(c.values.iter().all(|&e| (0.0..=1.0).contains(&e)));
    }

    #[test]
    fn poisson_toy_second_derivative() {
        let grid = Grid::uniform(6.0, 0.01).unwrap();
        let lsd = gap_to_lsd(&toy_curve(grid, |s| (-s).exp())).unwrap();
        for (s, p) in lsd.grid.points().iter().zip(&lsd.values) {
            assert!((p - (-s).exp()).abs() < 1e-8, "s={s}: {p}");
        }
    }

    #[test]
    fn linear_toy_has_zero_density() {
        let grid = Grid::uniform(1.0, 0.01).unwrap();
        let lsd = gap_to_lsd(&toy_curve(grid, |s| 1.0 - s)).unwrap();
        assert!(lsd.values.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = Grid::uniform(6.0, 0.05).unwrap();
        let err = gap_to_lsd(&toy_curve(grid, |s| (-s).exp())).unwrap_err();
        assert!(err.is_invalid_argument());
        assert!(err.to_string().contains("0.02"), "{err}");
    }

    #[test]
    fn convergence_report_rows() {
        let rows = convergence_report(
            &CurveSource::Kernel {
                kernel: KernelSpec::SINE,
            },
            &[1.0, 2.0],
            &[10, 20, 40],
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].m_low, rows[0].m_high), (10, 20));
        assert!(rows[1].rel_shift <= rows[0].rel_shift);
        assert!(convergence_report(&CurveSource::PureClass { beta: 2 }, &[1.0], &[20]).is_err());
    }

    #[test]
    fn pure_class_rejects_bad_beta() {
        let grid = Grid::uniform(6.0, 0.01).unwrap();
        assert!(pure_class_lsd(3, &grid, 20).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn gue_small_s_series() {
        // E_2(s) = 1 - s + pi^2 s^4 / 36 + ... so P(s) / s^2 -> pi^2 / 3.
        let grid = Grid::uniform(6.0, 0.01).unwrap();
        let lsd = pure_class_lsd(2, &grid, 40).unwrap();
        let ratio = lsd.values[2] / (0.02f64 * 0.02);
        assert!((ratio / (PI * PI / 3.0) - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn implied_mean_spacing_reads_the_slope_at_zero() {
        let grid = Grid::uniform(1.0, 0.01).unwrap();
        let curve = toy_curve(grid, |s| (-2.0 * s).exp());
        assert!((implied_mean_spacing(&curve).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pure_classes_need_no_rescale_on_truncated_grids() {
        let grid = Grid::uniform(3.0, 0.01).unwrap();
        for beta in [1, 2, 4] {
            let gap = pure_class_gap_curve(beta, &grid, 60).unwrap();
            assert_eq!(gap.spacing_scale, 1.0, "beta = {beta}");
            assert!(gap.values.iter().all(|&e| (0.0..=1.0).contains(&e)));
        }
    }
}
