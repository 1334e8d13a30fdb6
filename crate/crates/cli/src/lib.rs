//! Command-line front end of `rmt-spacing`.
//!
//! `main` only calls [`main_with_args`]; the recipes in [`reproduce`] are
//! public so integration tests can drive them without spawning processes.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;
pub mod reproduce;

use std::ffi::OsString;

use anyhow::Result;
use clap::Parser;
use rmt_spacing::cache::CurveCache;
use rmt_spacing::Error as CoreError;

use crate::args::{Cli, Command};
use crate::output::ManifestBuilder;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

/// Bad command-line or config input detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some embedded acceptance tolerance failed.
    ChecksFailed,
    /// `cache verify` found mismatched or unreadable entries.
    CacheCorrupt,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => EXIT_OK,
            Outcome::ChecksFailed => EXIT_ACCEPTANCE,
            Outcome::CacheCorrupt => EXIT_OTHER,
        }
    }
}

/// Shared state of one invocation.
#[derive(Debug)]
pub struct Context {
    pub cache: CurveCache,
    pub manifest: ManifestBuilder,
}

impl Context {
    pub fn new(cache: CurveCache, command_line: Vec<String>, config: serde_json::Value) -> Self {
        Context {
            cache,
            manifest: ManifestBuilder::new(command_line, config),
        }
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidArgument(_)) => EXIT_USAGE,
        Some(CoreError::Determinant { .. } | CoreError::Numerical(_) | CoreError::Fit(_)) => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

pub fn run(cli: &Cli, ctx: &Context) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be >= 1".into()).into());
        }
        // Fails only if a pool already exists (e.g. a second call in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Quad(c) => commands::quad(ctx, c),
        Command::Kernel(c) => commands::kernel(c),
        Command::Gap(a) => commands::gap(ctx, a),
        Command::Lsd(a) => commands::lsd(ctx, a),
        Command::Converge(a) => commands::converge(ctx, a),
        Command::Surmise(a) => commands::surmise(ctx, a),
        Command::Simulate(a) => commands::simulate_cmd(ctx, a),
        Command::Fit(a) => commands::fit(ctx, a),
        Command::Ratio(a) => commands::ratio(ctx, a),
        Command::Reproduce(a) => commands::reproduce_cmd(ctx, a),
        Command::Cache(c) => commands::cache(ctx, c),
    }
}

/// Parse, execute and map the result to a process exit code.
pub fn main_with_args(argv: Vec<OsString>) -> i32 {
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let command_line = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let config = serde_json::json!({
        "command": cli.command.name(),
        "args": serde_json::to_value(&cli.command).unwrap_or_default(),
        "threads": cli.threads,
    });
    let ctx = Context::new(CurveCache::from_env(), command_line, config);
    match run(&cli, &ctx) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
