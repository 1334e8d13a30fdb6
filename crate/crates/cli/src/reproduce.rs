//! Recipes regenerating the reference curves and tables, each with embedded
//! tolerance checks.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Result;
use rmt_spacing::fitting::{fit_lambda, ratio_curve, surmise_bias, FitResult, RatioCurve, Tabulated, DEFAULT_TOLERANCE, DEFAULT_WINDOW};
use rmt_spacing::fredholm::{convergence_report, gap_to_lsd, CurveSource, Grid, LsdCurve};
use rmt_spacing::kernels::{lambda_big_to_rho, KernelSpec};
use rmt_spacing::surmise::{crossover_surmise, wigner_surmise_pure};
use serde::Serialize;
use serde_json::json;

use crate::args::Target;
use crate::output::{emit, emit_json, Table};
use crate::Context;

pub const RECIPE_M: usize = 200;
pub const RECIPE_S_MAX: f64 = 6.0;
pub const RECIPE_DS: f64 = 0.01;

/// `(Lambda, reference lambda*)`.
pub const LAMBDA_TABLE: [(f64, f64); 4] = [(0.05, 0.0463), (0.1, 0.1828), (0.2, 0.2759), (1.0, 0.9613)];
pub const LAMBDA_TOLERANCE: f64 = 0.003;

/// `(s, largest allowed relative shift)` of E(s) for m: 100 -> 200.
pub const CONVERGENCE_BANDS: [(f64, f64); 4] = [(1.0, 1e-7), (2.0, 1e-6), (3.0, 1e-5), (4.0, 1e-3)];
pub const CONVERGENCE_ORDERS: [usize; 4] = [25, 50, 100, 200];
pub const CHECKED_ORDERS: (usize, usize) = (100, 200);

/// Surmise/exact ratios must stay within this of 1 on `RATIO_BAND`.
pub const RATIO_BAND: (f64, f64) = (0.2, 2.0);
pub const RATIO_TOLERANCE: f64 = 0.05;
pub const RATIO_S_MIN: f64 = 0.05;

/// Relative tolerance of small-s coefficients and ratio intercepts.
pub const SMALL_S_TOLERANCE: f64 = 0.01;
/// Grid points used to extrapolate small-s limits to s = 0.
pub const SMALL_S_POINTS: [f64; 4] = [0.05, 0.1, 0.15, 0.2];

pub const MASS_RANGE: (f64, f64) = (0.999, 1.0001);
pub const MEAN_RANGE: (f64, f64) = (0.995, 1.005);
pub const MAX_P0: f64 = 1e-4;
pub const MIN_P: f64 = -1e-8;

/// Leading small-s coefficient `c` of `P(s) ~ c s^beta` for the exact
/// unit-mean curves.
pub fn exact_small_s_coefficient(beta: u8) -> f64 {
    match beta {
        1 => PI * PI / 6.0,
        2 => PI * PI / 3.0,
        _ => 16.0 * PI.powi(4) / 135.0,
    }
}

/// Leading small-s coefficient of the pure-class surmise.
pub fn surmise_small_s_coefficient(beta: u8) -> f64 {
    match beta {
        1 => PI / 2.0,
        2 => 32.0 / (PI * PI),
        _ => 2f64.powi(18) / (3f64.powi(6) * PI.powi(3)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, max: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit: format!("<= {max:e}"),
            pass: value <= max,
        }
    }

    pub fn in_range(name: impl Into<String>, value: f64, (lo, hi): (f64, f64)) -> Check {
        Check {
            name: name.into(),
            value,
            limit: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }

    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit: format!("{target} +- {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }

    pub fn relative(name: impl Into<String>, value: f64, target: f64, rel: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit: format!("{target:.6} within {}%", rel * 100.0),
            pass: ((value - target) / target).abs() <= rel,
        }
    }

    pub fn line(&self) -> String {
        let v = self.value;
        let value = if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) { format!("{v:e}") } else { format!("{v}") };
        format!(
            "{} {}: {value} (limit {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.limit
        )
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn extend(&mut self, other: Artifacts) {
        self.files.extend(other.files);
        self.checks.extend(other.checks);
    }

    fn write(&mut self, dir: &Path, name: &str, text: &str) -> Result<()> {
        let path = dir.join(name);
        emit(Some(&path), text)?;
        self.files.push(path);
        Ok(())
    }
}

pub fn recipe_grid() -> Grid {
    Grid::uniform(RECIPE_S_MAX, RECIPE_DS).expect("valid recipe grid")
}

/// Exact spacing density of `source` on the recipe grid, through the cache.
pub fn exact_lsd(ctx: &Context, source: &CurveSource) -> Result<LsdCurve> {
    let (gap, _) = ctx.cache.gap_curve(source, &recipe_grid(), RECIPE_M)?;
    ctx.manifest.touch(gap.cache_key());
    Ok(gap_to_lsd(&gap)?)
}

pub fn crossover_source(lambda_big: f64) -> Result<CurveSource> {
    let kernel = KernelSpec::dynamical(lambda_big_to_rho(lambda_big)?)?;
    Ok(CurveSource::Kernel { kernel })
}

/// Exact crossover curve at `lambda_big` and its surmise fit.
pub fn fit_exact(ctx: &Context, lambda_big: f64) -> Result<(LsdCurve, FitResult)> {
    let lsd = exact_lsd(ctx, &crossover_source(lambda_big)?)?;
    let fit = fit_lambda(&Tabulated::from_lsd(&lsd), DEFAULT_WINDOW, DEFAULT_TOLERANCE)?;
    Ok((lsd, fit))
}

pub fn normalization_checks(label: &str, lsd: &LsdCurve) -> Vec<Check> {
    let min = lsd.values.iter().copied().fold(f64::INFINITY, f64::min);
    vec![
        Check::in_range(format!("{label} mass"), lsd.mass, MASS_RANGE),
        Check::in_range(format!("{label} mean"), lsd.mean, MEAN_RANGE),
        Check::at_most(format!("{label} P(0)"), lsd.values[0], MAX_P0),
        Check {
            name: format!("{label} min P"),
            value: min,
            limit: format!(">= {MIN_P:e}"),
            pass: min >= MIN_P,
        },
    ]
}

/// Value at 0 of the polynomial through `points`.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let mut p: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let x: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    for level in 1..p.len() {
        for i in (level..p.len()).rev() {
            p[i] = (x[i] * p[i - 1] - x[i - level] * p[i]) / (x[i] - x[i - level]);
        }
    }
    p[p.len() - 1]
}

/// Limit of `P(s) / s^power` as `s -> 0`.
pub fn small_s_limit(lsd: &LsdCurve, power: i32) -> f64 {
    let h = lsd.step();
    let points: Vec<(f64, f64)> = SMALL_S_POINTS
        .iter()
        .map(|&s| {
            let i = (s / h).round() as usize;
            let s = lsd.grid.points()[i];
            (s, lsd.values[i] / s.powi(power))
        })
        .collect();
    extrapolate_to_zero(&points)
}

/// Limit of a ratio curve as `s -> 0`.
pub fn ratio_intercept(ratio: &RatioCurve) -> f64 {
    let points: Vec<(f64, f64)> = SMALL_S_POINTS
        .iter()
        .filter_map(|&s| ratio.points.iter().find(|p| (p.0 - s).abs() < 1e-9).copied())
        .collect();
    extrapolate_to_zero(&points)
}

pub fn max_ratio_deviation(ratio: &RatioCurve, (lo, hi): (f64, f64)) -> f64 {
    ratio
        .points
        .iter()
        .filter(|p| p.0 >= lo - 1e-9 && p.0 <= hi + 1e-9)
        .map(|p| (p.1 - 1.0).abs())
        .fold(0.0, f64::max)
}

fn curve_meta(lsd: &LsdCurve) -> serde_json::Value {
    json!({
        "source": lsd.source,
        "m": lsd.m,
        "s_max": lsd.grid.s_max(),
        "ds": lsd.step(),
        "cache_key": lsd.gap_cache_key,
        "mass": lsd.mass,
        "mean": lsd.mean,
    })
}

const GNUPLOT_PREAMBLE: &str = "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n";

pub fn lambda_table(ctx: &Context, out: &Path) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut table = Table::new(
        json!({"artifact": "lambda-table", "m": RECIPE_M, "ds": RECIPE_DS, "window": DEFAULT_WINDOW}),
        &["Lambda", "rho", "lambda_star", "delta2", "reference_lambda_star", "abs_error", "surmise_bias", "locally_optimal"],
    );
    for (lambda_big, reference) in LAMBDA_TABLE {
        let (_, fit) = fit_exact(ctx, lambda_big)?;
        let err = (fit.lambda_star - reference).abs();
        table.push(vec![
            lambda_big,
            lambda_big_to_rho(lambda_big)?,
            fit.lambda_star,
            fit.delta2,
            reference,
            err,
            surmise_bias(fit.lambda_star, lambda_big)?,
            f64::from(u8::from(fit.certificate.locally_optimal)),
        ]);
        art.checks.push(Check::near(
            format!("lambda-table Lambda={lambda_big} lambda*"),
            fit.lambda_star,
            reference,
            LAMBDA_TOLERANCE,
        ));
    }
    art.write(out, "lambda_table.csv", &table.render())?;
    art.write(
        out,
        "lambda_table.gp",
        &format!(
            "{GNUPLOT_PREAMBLE}set xlabel 'Lambda'\nset ylabel 'lambda*'\nset logscale xy\n\
             plot 'lambda_table.csv' using 1:3 with linespoints, '' using 1:5 with points, x title 'lambda = Lambda'\n"
        ),
    )?;
    Ok(art)
}

pub fn convergence(_ctx: &Context, out: &Path) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let s_list: Vec<f64> = CONVERGENCE_BANDS.iter().map(|b| b.0).collect();
    let mut table = Table::new(
        json!({"artifact": "convergence", "kernel": "dynamical_sine", "orders": CONVERGENCE_ORDERS}),
        &["Lambda", "s", "m_low", "m_high", "rel_shift", "e_low", "e_high"],
    );
    for (lambda_big, _) in LAMBDA_TABLE {
        let rows = convergence_report(&crossover_source(lambda_big)?, &s_list, &CONVERGENCE_ORDERS)?;
        for r in &rows {
            table.push(vec![lambda_big, r.s, r.m_low as f64, r.m_high as f64, r.rel_shift, r.e_low, r.e_high]);
            if (r.m_low, r.m_high) == CHECKED_ORDERS {
                let band = CONVERGENCE_BANDS.iter().find(|b| b.0 == r.s).map_or(0.0, |b| b.1);
                art.checks.push(Check::at_most(
                    format!("convergence Lambda={lambda_big} s={} m {}->{}", r.s, r.m_low, r.m_high),
                    r.rel_shift,
                    band,
                ));
            }
        }
    }
    art.write(out, "convergence.csv", &table.render())?;
    art.write(
        out,
        "convergence.gp",
        &format!(
            "{GNUPLOT_PREAMBLE}set xlabel 's'\nset ylabel 'relative shift of E(s), m 100 -> 200'\nset logscale y\n\
             plot 'convergence.csv' using 2:($3 == 100 ? $5 : 1/0) with points title 'all Lambda'\n"
        ),
    )?;
    Ok(art)
}

pub fn fig1(ctx: &Context, out: &Path) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut plot = String::from(GNUPLOT_PREAMBLE);
    plot.push_str("set xlabel 's'\nset multiplot layout 1,2\nset ylabel 'P(s)'\nplot ");
    let mut ratio_plot = String::from("set ylabel 'surmise / exact'\nplot ");
    for (k, beta) in [1u8, 2, 4].into_iter().enumerate() {
        let lsd = exact_lsd(ctx, &CurveSource::PureClass { beta })?;
        let s = lsd.grid.points().to_vec();
        let exact = Tabulated::from_lsd(&lsd);
        let surmise = Tabulated::from_fn(format!("surmise beta={beta}"), s.clone(), |x| {
            wigner_surmise_pure(beta, x).expect("valid beta")
        })?;
        let ratio = ratio_curve(&surmise, &exact, RATIO_S_MIN)?;

        let mut curves = Table::new(curve_meta(&lsd), &["s", "P_exact", "P_surmise"]);
        for ((x, p), q) in s.iter().zip(lsd.clipped_values()).zip(&surmise.values) {
            curves.push(vec![*x, p, *q]);
        }
        let curve_file = format!("fig1_beta{beta}.csv");
        art.write(out, &curve_file, &curves.render())?;

        let mut ratios = Table::new(
            json!({"ratio": format!("surmise/exact beta={beta}"), "s_min": RATIO_S_MIN, "omitted": ratio.omitted}),
            &["s", "ratio"],
        );
        for &(x, r) in &ratio.points {
            ratios.push(vec![x, r]);
        }
        let ratio_file = format!("fig1_ratio_beta{beta}.csv");
        art.write(out, &ratio_file, &ratios.render())?;

        let sep = if k == 0 { "" } else { ", " };
        plot.push_str(&format!("{sep}'{curve_file}' using 1:2 with lines, '' using 1:3 with lines dt 2"));
        ratio_plot.push_str(&format!("{sep}'{ratio_file}' using 1:2 with lines title 'beta={beta}'"));

        let label = format!("fig1 beta={beta}");
        art.checks.extend(normalization_checks(&label, &lsd));
        let power = i32::from(beta);
        art.checks.push(Check::relative(
            format!("{label} P(s)/s^{power} at s->0"),
            small_s_limit(&lsd, power),
            exact_small_s_coefficient(beta),
            SMALL_S_TOLERANCE,
        ));
        art.checks.push(Check::relative(
            format!("{label} ratio intercept"),
            ratio_intercept(&ratio),
            surmise_small_s_coefficient(beta) / exact_small_s_coefficient(beta),
            SMALL_S_TOLERANCE,
        ));
    }
    plot.push('\n');
    plot.push_str(&ratio_plot);
    plot.push_str("\nunset multiplot\n");
    art.write(out, "fig1.gp", &plot)?;
    Ok(art)
}

fn lambda_label(lambda_big: f64) -> String {
    format!("{lambda_big}")
}

pub fn fig2(ctx: &Context, out: &Path) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut plot = format!("{GNUPLOT_PREAMBLE}set xlabel 's'\nset ylabel 'P(s)'\nplot ");
    for (k, (lambda_big, _)) in LAMBDA_TABLE.into_iter().enumerate() {
        let (lsd, fit) = fit_exact(ctx, lambda_big)?;
        let mut meta = curve_meta(&lsd);
        meta["Lambda"] = json!(lambda_big);
        meta["lambda_star"] = json!(fit.lambda_star);
        meta["delta2"] = json!(fit.delta2);
        let mut table = Table::new(meta, &["s", "P_exact", "P_surmise"]);
        for (&x, p) in lsd.grid.points().iter().zip(lsd.clipped_values()) {
            table.push(vec![x, p, crossover_surmise(x, fit.lambda_star)]);
        }
        let file = format!("fig2_Lambda{}.csv", lambda_label(lambda_big));
        art.write(out, &file, &table.render())?;
        let sep = if k == 0 { "" } else { ", " };
        plot.push_str(&format!("{sep}'{file}' using 1:2 with lines, '' using 1:3 with points pt 7 ps 0.3"));
        let label = format!("fig2 Lambda={lambda_big}");
        art.checks.extend(normalization_checks(&label, &lsd));
        art.checks.push(Check {
            name: format!("{label} fit locally optimal"),
            value: fit.lambda_star,
            limit: "Delta_2 minimal at +-step".into(),
            pass: fit.certificate.locally_optimal,
        });
    }
    plot.push('\n');
    art.write(out, "fig2.gp", &plot)?;
    Ok(art)
}

pub fn fig3(ctx: &Context, out: &Path) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut plot = format!(
        "{GNUPLOT_PREAMBLE}set xlabel 's'\nset ylabel 'surmise / exact'\nset xrange [0:3]\nplot "
    );
    for (k, (lambda_big, _)) in LAMBDA_TABLE.into_iter().enumerate() {
        let (lsd, fit) = fit_exact(ctx, lambda_big)?;
        let exact = Tabulated::from_lsd(&lsd);
        let surmise = Tabulated::from_fn("crossover surmise", exact.s.clone(), |x| {
            crossover_surmise(x, fit.lambda_star)
        })?;
        let ratio = ratio_curve(&surmise, &exact, RATIO_S_MIN)?;
        let mut table = Table::new(
            json!({"Lambda": lambda_big, "lambda_star": fit.lambda_star, "s_min": RATIO_S_MIN, "omitted": ratio.omitted, "cache_key": lsd.gap_cache_key}),
            &["s", "ratio"],
        );
        for &(x, r) in &ratio.points {
            table.push(vec![x, r]);
        }
        let file = format!("fig3_Lambda{}.csv", lambda_label(lambda_big));
        art.write(out, &file, &table.render())?;
        let sep = if k == 0 { "" } else { ", " };
        plot.push_str(&format!("{sep}'{file}' using 1:2 with lines title 'Lambda={lambda_big}'"));
        art.checks.push(Check::at_most(
            format!("fig3 Lambda={lambda_big} max |ratio-1| on [{}, {}]", RATIO_BAND.0, RATIO_BAND.1),
            max_ratio_deviation(&ratio, RATIO_BAND),
            RATIO_TOLERANCE,
        ));
    }
    plot.push('\n');
    art.write(out, "fig3.gp", &plot)?;
    Ok(art)
}

pub fn target_name(target: Target) -> &'static str {
    match target {
        Target::Fig1 => "fig1",
        Target::Fig2 => "fig2",
        Target::Fig3 => "fig3",
        Target::LambdaTable => "lambda-table",
        Target::Convergence => "convergence",
        Target::All => "all",
    }
}

/// Run one recipe (or all of them) into `out`, writing
/// `<target>.checks.json` alongside the data.
pub fn run(ctx: &Context, target: Target, out: &Path) -> Result<Artifacts> {
    std::fs::create_dir_all(out)?;
    let mut art = match target {
        Target::Fig1 => fig1(ctx, out)?,
        Target::Fig2 => fig2(ctx, out)?,
        Target::Fig3 => fig3(ctx, out)?,
        Target::LambdaTable => lambda_table(ctx, out)?,
        Target::Convergence => convergence(ctx, out)?,
        Target::All => {
            let mut all = Artifacts::default();
            for t in [Target::LambdaTable, Target::Convergence, Target::Fig1, Target::Fig2, Target::Fig3] {
                all.extend(run(ctx, t, out)?);
            }
            return Ok(all);
        }
    };
    let checks = out.join(format!("{}.checks.json", target_name(target)));
    emit_json(Some(&checks), &art.checks)?;
    art.files.push(checks);
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_is_exact_for_cubics() {
        let f = |x: f64| 2.0 - x + 0.5 * x * x - 3.0 * x.powi(3);
        let pts: Vec<(f64, f64)> = SMALL_S_POINTS.iter().map(|&x| (x, f(x))).collect();
        assert!((extrapolate_to_zero(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_lambda_table_is_increasing() {
        assert!(LAMBDA_TABLE.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
    }
}
