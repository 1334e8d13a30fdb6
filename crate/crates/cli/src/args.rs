use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exact and surmised level spacing distributions of Gaussian random-matrix
/// ensembles and the GOE -> GUE crossover.
///
/// Exit codes: 0 success, 2 invalid arguments, 3 numerical failure,
/// 4 acceptance-tolerance failure (reproduce), 1 other I/O or cache errors.
/// SPECTRAL_CACHE_DIR overrides the gap-curve cache location.
#[derive(Debug, Parser, Serialize)]
#[command(name = "rmt-spacing", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// key=value file supplying defaults for any flag; command-line flags win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Gauss-Legendre rules
    #[command(subcommand)]
    Quad(QuadCommand),
    /// Pointwise kernel evaluation
    #[command(subcommand)]
    Kernel(KernelCommand),
    /// Gap probability E(s) on a grid -> CSV `s,E`
    Gap(CurveArgs),
    /// Spacing density P(s) = E''(s) -> CSV `s,P` plus a JSON sidecar
    Lsd(CurveArgs),
    /// Relative shifts of E(s) between quadrature orders
    Converge(ConvergeArgs),
    /// Wigner surmise densities and the 2x2 Monte Carlo oracle
    Surmise(SurmiseArgs),
    /// Finite-N ensemble simulation -> unfolded spacings + report
    Simulate(SimulateArgs),
    /// Fit the surmise parameter lambda -> JSON FitResult
    Fit(FitArgs),
    /// Pointwise ratio of two tabulated curves
    Ratio(RatioArgs),
    /// Regenerate a figure or table with its acceptance checks
    Reproduce(ReproduceArgs),
    /// Inspect or maintain the gap-curve cache
    #[command(subcommand)]
    Cache(CacheCommand),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Quad(_) => "quad",
            Command::Kernel(_) => "kernel",
            Command::Gap(_) => "gap",
            Command::Lsd(_) => "lsd",
            Command::Converge(_) => "converge",
            Command::Surmise(_) => "surmise",
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Ratio(_) => "ratio",
            Command::Reproduce(_) => "reproduce",
            Command::Cache(_) => "cache",
        }
    }
}

/// Closed interval written as `a,b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval(pub f64, pub f64);

impl std::str::FromStr for Interval {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (a, b) = text
            .split_once(',')
            .ok_or_else(|| format!("expected `a,b`, got `{text}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(format!("interval needs finite a < b, got [{a}, {b}]"));
        }
        Ok(Interval(a, b))
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadCommand {
    /// Nodes and weights -> CSV `index,node,weight`
    Dump(QuadDumpArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct QuadDumpArgs {
    /// Number of nodes
    #[arg(long)]
    pub m: usize,
    /// Integration interval
    #[arg(long, value_name = "A,B", default_value = "0,1", allow_hyphen_values = true)]
    pub interval: Interval,
    /// Output file (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKindArg {
    Sine,
    Even,
    Odd,
    Dyn,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelCommand {
    /// Print K(x, y) (or the 2x2 block for `dyn`) as JSON
    Eval(KernelEvalArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct KernelEvalArgs {
    #[arg(long, value_enum)]
    pub kind: KernelKindArg,
    /// Crossover parameter (required for `dyn`)
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKernel {
    /// Sine kernel (GUE)
    Sine,
    /// Dynamical 2x2 kernel of the GOE -> GUE crossover
    Dyn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleClass {
    Goe,
    Gue,
    Gse,
}

impl EnsembleClass {
    pub fn beta(self) -> u8 {
        match self {
            EnsembleClass::Goe => 1,
            EnsembleClass::Gue => 2,
            EnsembleClass::Gse => 4,
        }
    }
}

/// Which exact curve to compute.
#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["kernel", "class"])))]
#[command(group(ArgGroup::new("strength").args(["rho", "lambda_big"])))]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<CurveKernel>,
    /// Pure symmetry class (unit-mean exact curve)
    #[arg(long, value_enum)]
    pub class: Option<EnsembleClass>,
    /// Kernel parameter of `--kernel dyn`
    #[arg(long)]
    pub rho: Option<f64>,
    /// Spacing-rescaled crossover strength, rho = Lambda / sqrt(2 pi)
    #[arg(long = "Lambda", id = "lambda_big")]
    pub lambda_big: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Quadrature order
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    /// Largest spacing on the grid
    #[arg(long, default_value_t = 6.0)]
    pub smax: f64,
    /// Grid step
    #[arg(long, default_value_t = 0.01)]
    pub ds: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output CSV (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Interval lengths to probe
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub s: Vec<f64>,
    /// Increasing quadrature orders
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200")]
    pub m: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_conflicts_with_subcommands = true)]
#[command(group(ArgGroup::new("surmise").args(["beta", "lambda"])))]
pub struct SurmiseArgs {
    #[command(subcommand)]
    pub command: Option<SurmiseCommand>,
    /// Pure-class surmise (1, 2 or 4)
    #[arg(long)]
    pub beta: Option<u8>,
    /// Crossover surmise parameter
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 6.0)]
    pub smax: f64,
    #[arg(long, default_value_t = 0.01)]
    pub ds: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurmiseCommand {
    /// Sample 2x2 crossover matrices -> CSV `raw,s` (s normalized to mean 1)
    Mc(SurmiseMcArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SurmiseMcArgs {
    #[arg(long)]
    pub lambda: f64,
    /// Number of 2x2 samples
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("strength").required(true).args(["alpha", "target_lambda", "class"])))]
pub struct SimulateArgs {
    /// Bare perturbation strength of H = H_GOE + alpha H_GUE
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Solve for alpha so the measured Lambda matches this value
    #[arg(long = "target-Lambda", id = "target_lambda")]
    pub target_lambda: Option<f64>,
    /// Pure ensemble instead of the crossover
    #[arg(long, value_enum)]
    pub class: Option<EnsembleClass>,
    /// Matrix size
    #[arg(long = "N", id = "n", default_value_t = 400)]
    pub n: usize,
    /// Number of matrices
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Central fraction of each spectrum kept
    #[arg(long, default_value_t = 0.5)]
    pub bulk: f64,
    /// Matrices per secant step of --target-Lambda
    #[arg(long, default_value_t = 100)]
    pub probe_samples: usize,
    /// Output directory (spacings.csv, report.json, manifest.json)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("target").required(true).args(["lambda_big", "sample"])))]
pub struct FitArgs {
    /// Fit the exact crossover curve at this Lambda
    #[arg(long = "Lambda", id = "lambda_big")]
    pub lambda_big: Option<f64>,
    /// Fit a histogram of unit-mean spacings (first column of a CSV)
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// Integration window of Delta_2
    #[arg(long, value_name = "A,B", default_value = "0,6")]
    pub window: Interval,
    /// Quadrature order of the exact curve
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    /// Grid step of the exact curve
    #[arg(long, default_value_t = 0.01)]
    pub ds: f64,
    /// Histogram bins for --sample
    #[arg(long, default_value_t = 60)]
    pub bins: usize,
    /// Golden-section tolerance on lambda
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RatioArgs {
    /// Numerator CSV (columns s, value)
    #[arg(long)]
    pub num: PathBuf,
    /// Denominator CSV (columns s, value)
    #[arg(long)]
    pub den: PathBuf,
    /// Smallest s kept
    #[arg(long, default_value_t = 0.05)]
    pub smin: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Fig1,
    Fig2,
    Fig3,
    LambdaTable,
    Convergence,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    /// Output directory
    #[arg(long, default_value = "reproduce")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheCommand {
    /// List cached gap curves
    List,
    /// Delete every cached curve
    Clear,
    /// Recompute 1% of the cached determinants and compare bits
    Verify {
        /// Seed choosing the recomputed points
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}
