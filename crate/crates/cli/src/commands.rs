use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use rmt_spacing::ensembles::{simulate, solve_alpha, EnsembleConfig};
use rmt_spacing::fitting::{fit_lambda, fit_lambda_to_sample, ratio_curve, Tabulated};
use rmt_spacing::fredholm::{convergence_report, gap_to_lsd, CurveSource, Grid};
use rmt_spacing::kernels::{
    dynamical_kernel, lambda_big_to_rho, sine_kernel, sine_kernel_projected, DynamicalKernel, KernelSpec, Parity,
    RHO_RAW_CAP,
};
use rmt_spacing::quadrature::gauss_legendre_on;
use rmt_spacing::surmise::{surmise_mc_oracle, SurmiseSpec};
use serde_json::json;

use crate::args::*;
use crate::output::{column, emit, emit_json, read_table, sidecar, Table};
use crate::reproduce;
use crate::{Context, Outcome, UsageError};

/// Relative tolerance of the `--target-Lambda` secant solve.
pub const ALPHA_SOLVE_TOLERANCE: f64 = 0.02;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn source_of(args: &SourceArgs) -> Result<CurveSource> {
    match (args.kernel, args.class) {
        (Some(CurveKernel::Dyn), _) => {
            let rho = match (args.rho, args.lambda_big) {
                (Some(rho), _) => rho,
                (None, Some(l)) => lambda_big_to_rho(l)?,
                (None, None) => return Err(usage("--kernel dyn needs --rho or --Lambda")),
            };
            Ok(CurveSource::Kernel {
                kernel: KernelSpec::dynamical(rho)?,
            })
        }
        _ if args.rho.is_some() || args.lambda_big.is_some() => {
            Err(usage("--rho/--Lambda only apply to --kernel dyn"))
        }
        (Some(CurveKernel::Sine), _) => Ok(CurveSource::Kernel { kernel: KernelSpec::SINE }),
        (None, Some(class)) => Ok(CurveSource::PureClass { beta: class.beta() }),
        (None, None) => Err(usage("one of --kernel or --class is required")),
    }
}

/// Write `text` (CSV) and, when it goes to a file, its manifest.
fn finish(ctx: &Context, out: Option<&Path>, text: &str, extra: Vec<PathBuf>) -> Result<()> {
    emit(out, text)?;
    if let Some(path) = out {
        let mut outputs = vec![path.to_path_buf()];
        outputs.extend(extra);
        ctx.manifest.write_beside(path, outputs)?;
    }
    Ok(())
}

pub fn quad(ctx: &Context, cmd: &QuadCommand) -> Result<Outcome> {
    let QuadCommand::Dump(a) = cmd;
    let rule = gauss_legendre_on(a.m, a.interval.0, a.interval.1)?;
    let mut table = Table::new(
        json!({"rule": "gauss-legendre", "m": a.m, "interval": [a.interval.0, a.interval.1]}),
        &["index", "node", "weight"],
    );
    for (i, (x, w)) in rule.iter().enumerate() {
        table.push(vec![i as f64, x, w]);
    }
    finish(ctx, a.out.as_deref(), &table.render(), Vec::new())?;
    Ok(Outcome::Success)
}

pub fn kernel(cmd: &KernelCommand) -> Result<Outcome> {
    let KernelCommand::Eval(a) = cmd;
    if a.kind != KernelKindArg::Dyn && a.rho.is_some() {
        return Err(usage("--rho only applies to --kind dyn"));
    }
    let value = match a.kind {
        KernelKindArg::Sine => json!({"kind": "sine", "x": a.x, "y": a.y, "value": sine_kernel(a.x, a.y)}),
        KernelKindArg::Even | KernelKindArg::Odd => {
            let parity = if a.kind == KernelKindArg::Even { Parity::Even } else { Parity::Odd };
            json!({
                "kind": if parity == Parity::Even { "even" } else { "odd" },
                "x": a.x,
                "y": a.y,
                "value": sine_kernel_projected(a.x, a.y, parity),
            })
        }
        KernelKindArg::Dyn => {
            let rho = a.rho.ok_or_else(|| usage("--kind dyn needs --rho"))?;
            let (block, gauge) = if rho <= RHO_RAW_CAP {
                (dynamical_kernel(a.x, a.y, rho)?, "raw")
            } else {
                let r = a.x - a.y;
                (DynamicalKernel::new(rho, r.abs().max(1.0))?.balanced(r), "balanced")
            };
            json!({"kind": "dyn", "rho": rho, "x": a.x, "y": a.y, "gauge": gauge, "block": block.as_matrix()})
        }
    };
    emit_json(None, &value)?;
    Ok(Outcome::Success)
}

fn grid_of(g: &GridArgs) -> Result<Grid> {
    Ok(Grid::uniform(g.smax, g.ds)?)
}

pub fn gap(ctx: &Context, a: &CurveArgs) -> Result<Outcome> {
    let source = source_of(&a.source)?;
    let grid = grid_of(&a.grid)?;
    let (curve, hit) = ctx.cache.gap_curve(&source, &grid, a.grid.m)?;
    ctx.manifest.touch(curve.cache_key());
    let mut table = Table::new(
        json!({
            "quantity": "E",
            "source": source,
            "assembly": curve.assembly,
            "m": curve.m,
            "s_max": a.grid.smax,
            "ds": a.grid.ds,
            "spacing_scale": curve.spacing_scale,
            "cache_key": curve.cache_key(),
        }),
        &["s", "E"],
    );
    for (&s, &e) in grid.points().iter().zip(&curve.values) {
        table.push(vec![s, e]);
    }
    if hit {
        eprintln!("cache hit {}", curve.cache_key());
    }
    finish(ctx, a.out.as_deref(), &table.render(), Vec::new())?;
    Ok(Outcome::Success)
}

pub fn lsd(ctx: &Context, a: &CurveArgs) -> Result<Outcome> {
    let source = source_of(&a.source)?;
    let grid = grid_of(&a.grid)?;
    let (curve, _) = ctx.cache.gap_curve(&source, &grid, a.grid.m)?;
    ctx.manifest.touch(curve.cache_key());
    let lsd = gap_to_lsd(&curve)?;
    let meta = json!({
        "quantity": "P",
        "source": source,
        "assembly": lsd.assembly,
        "m": lsd.m,
        "s_max": a.grid.smax,
        "ds": a.grid.ds,
        "cache_key": lsd.gap_cache_key,
        "mass": lsd.mass,
        "mean": lsd.mean,
        "derivative_agreement": lsd.derivative_agreement,
        "spacing_scale": lsd.spacing_scale,
    });
    let mut table = Table::new(meta.clone(), &["s", "P"]);
    for (&s, p) in grid.points().iter().zip(lsd.clipped_values()) {
        table.push(vec![s, p]);
    }
    let mut extra = Vec::new();
    if let Some(out) = &a.out {
        let path = sidecar(out, "json");
        emit_json(Some(&path), &meta)?;
        extra.push(path);
    }
    finish(ctx, a.out.as_deref(), &table.render(), extra)?;
    Ok(Outcome::Success)
}

pub fn converge(ctx: &Context, a: &ConvergeArgs) -> Result<Outcome> {
    let source = source_of(&a.source)?;
    let rows = convergence_report(&source, &a.s, &a.m)?;
    let mut table = Table::new(
        json!({"quantity": "relative shift of E(s)", "source": source}),
        &["s", "m_low", "m_high", "rel_shift", "e_low", "e_high"],
    );
    for r in rows {
        table.push(vec![r.s, r.m_low as f64, r.m_high as f64, r.rel_shift, r.e_low, r.e_high]);
    }
    finish(ctx, a.out.as_deref(), &table.render(), Vec::new())?;
    Ok(Outcome::Success)
}

pub fn surmise(ctx: &Context, a: &SurmiseArgs) -> Result<Outcome> {
    if let Some(SurmiseCommand::Mc(mc)) = &a.command {
        ctx.manifest.set_seed(mc.seed);
        let sample = surmise_mc_oracle(mc.lambda, mc.n, mc.seed)?;
        let mut table = Table::new(
            json!({
                "lambda": mc.lambda,
                "n": mc.n,
                "seed": mc.seed,
                "raw_mean": sample.raw_mean,
                "raw_std_error": sample.raw_std_error,
            }),
            &["raw", "s"],
        );
        for (&r, &s) in sample.raw.iter().zip(&sample.spacings) {
            table.push(vec![r, s]);
        }
        finish(ctx, mc.out.as_deref(), &table.render(), Vec::new())?;
        return Ok(Outcome::Success);
    }
    let spec = match (a.beta, a.lambda) {
        (Some(beta), None) => SurmiseSpec::pure(beta)?,
        (None, Some(lambda)) => SurmiseSpec::crossover(lambda)?,
        _ => return Err(usage("surmise needs exactly one of --beta or --lambda (or the `mc` subcommand)")),
    };
    let grid = Grid::uniform(a.smax, a.ds)?;
    let mut table = Table::new(json!({"surmise": spec.to_string(), "s_max": a.smax, "ds": a.ds}), &["s", "P"]);
    for &s in grid.points() {
        table.push(vec![s, spec.density(s)]);
    }
    finish(ctx, a.out.as_deref(), &table.render(), Vec::new())?;
    Ok(Outcome::Success)
}

pub fn simulate_cmd(ctx: &Context, a: &SimulateArgs) -> Result<Outcome> {
    ctx.manifest.set_seed(a.seed);
    let mut solve = None;
    let config = match (a.class, a.alpha, a.target_lambda) {
        (Some(class), None, None) => EnsembleConfig::pure(class.beta(), a.n, a.samples, a.seed)?,
        (None, Some(alpha), None) => EnsembleConfig::crossover(alpha, a.n, a.samples, a.seed)?,
        (None, None, Some(target)) => {
            let s = solve_alpha(target, a.n, a.probe_samples, a.seed, a.bulk, ALPHA_SOLVE_TOLERANCE)?;
            let config = EnsembleConfig::crossover(s.alpha, a.n, a.samples, a.seed)?;
            solve = Some(s);
            config
        }
        _ => return Err(usage("give exactly one of --alpha, --target-Lambda or --class")),
    }
    .with_bulk_fraction(a.bulk)?;
    let sample = simulate(&config)?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let spacings_path = a.out.join("spacings.csv");
    let mut table = Table::new(
        json!({"config": config, "n_kept": sample.n_kept, "lambda_big_measured": sample.lambda_big_measured}),
        &["s"],
    );
    for &s in &sample.spacings {
        table.push(vec![s]);
    }
    emit(Some(&spacings_path), &table.render())?;
    let report_path = a.out.join("report.json");
    emit_json(
        Some(&report_path),
        &json!({
            "lambda_big_measured": sample.lambda_big_measured,
            "n_kept": sample.n_kept,
            "delta": sample.delta,
            "mean": sample.mean(),
            "unfolding": sample.unfolding,
            "unfolding_scale": sample.unfolding_scale,
            "config": config,
            "alpha_solve": solve,
        }),
    )?;
    let manifest = a.out.join("manifest.json");
    emit_json(Some(&manifest), &ctx.manifest.finish(vec![spacings_path, report_path]))?;
    Ok(Outcome::Success)
}

/// First column named `s` (or the first column) of a spacings CSV.
fn read_spacings(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_table(path)?;
    let k = header.iter().position(|h| h == "s").unwrap_or(0);
    let values = column(&rows, k);
    if values.is_empty() {
        bail!(UsageError(format!("{} contains no spacings", path.display())));
    }
    Ok(values)
}

pub fn fit(ctx: &Context, a: &FitArgs) -> Result<Outcome> {
    let window = (a.window.0, a.window.1);
    let result = match (a.lambda_big, &a.sample) {
        (Some(lambda_big), None) => {
            let source = reproduce::crossover_source(lambda_big)?;
            let grid = Grid::uniform(window.1.max(reproduce::RECIPE_S_MAX), a.ds)?;
            let (curve, _) = ctx.cache.gap_curve(&source, &grid, a.m)?;
            ctx.manifest.touch(curve.cache_key());
            let lsd = gap_to_lsd(&curve)?;
            fit_lambda(&Tabulated::from_lsd(&lsd), window, a.tol)?
        }
        (None, Some(path)) => {
            let spacings = read_spacings(path)?;
            fit_lambda_to_sample(&path.display().to_string(), &spacings, a.bins, window, a.tol)?
        }
        _ => return Err(usage("give exactly one of --Lambda or --sample")),
    };
    emit_json(a.out.as_deref(), &result)?;
    if let Some(out) = &a.out {
        ctx.manifest.write_beside(out, vec![out.clone()])?;
    }
    Ok(Outcome::Success)
}

fn read_curve(path: &Path) -> Result<Tabulated> {
    let (header, rows) = read_table(path)?;
    if header.len() < 2 {
        bail!(UsageError(format!("{} needs at least two columns (s, value)", path.display())));
    }
    Ok(Tabulated::new(path.display().to_string(), column(&rows, 0), column(&rows, 1))?)
}

pub fn ratio(ctx: &Context, a: &RatioArgs) -> Result<Outcome> {
    let num = read_curve(&a.num)?;
    let den = read_curve(&a.den)?;
    let curve = ratio_curve(&num, &den, a.smin)?;
    let mut table = Table::new(
        json!({"numerator": num.id, "denominator": den.id, "s_min": a.smin, "omitted": curve.omitted}),
        &["s", "ratio"],
    );
    for (s, r) in curve.points {
        table.push(vec![s, r]);
    }
    finish(ctx, a.out.as_deref(), &table.render(), Vec::new())?;
    Ok(Outcome::Success)
}

pub fn reproduce_cmd(ctx: &Context, a: &ReproduceArgs) -> Result<Outcome> {
    let art = reproduce::run(ctx, a.target, &a.out)?;
    for check in &art.checks {
        println!("{}", check.line());
    }
    let manifest = a.out.join(format!("{}.manifest.json", reproduce::target_name(a.target)));
    emit_json(Some(&manifest), &ctx.manifest.finish(art.files.clone()))?;
    let failed = art.failures().count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", art.checks.len());
        return Ok(Outcome::ChecksFailed);
    }
    eprintln!("all {} checks passed", art.checks.len());
    Ok(Outcome::Success)
}

pub fn cache(ctx: &Context, cmd: &CacheCommand) -> Result<Outcome> {
    match cmd {
        CacheCommand::List => {
            let entries = ctx.cache.list()?;
            println!("{} entries in {}", entries.len(), ctx.cache.dir().display());
            for e in entries {
                println!("{}  {:<32} m={:<4} points={:<5} s_max={} bytes={}", e.key, e.source, e.m, e.points, e.s_max, e.bytes);
            }
            Ok(Outcome::Success)
        }
        CacheCommand::Clear => {
            let n = ctx.cache.clear()?;
            println!("removed {n} entries from {}", ctx.cache.dir().display());
            Ok(Outcome::Success)
        }
        CacheCommand::Verify { seed } => {
            let report = ctx.cache.verify(*seed)?;
            println!(
                "checked {} points in {} curves: {} mismatched, {} corrupt",
                report.points_checked,
                report.curves,
                report.mismatched.len(),
                report.corrupt.len()
            );
            for key in &report.mismatched {
                println!("mismatch {key}");
            }
            for key in &report.corrupt {
                println!("corrupt {key}");
            }
            if report.ok() {
                Ok(Outcome::Success)
            } else {
                Ok(Outcome::CacheCorrupt)
            }
        }
    }
}
