//! `key = value` config files whose keys mirror long flags.
//!
//! The file is expanded into `--key value` arguments placed right after the
//! subcommand, skipping keys the user passed explicitly, so flags always win.
//! Keys that belong to a different subcommand are ignored, which lets one file
//! serve several commands; keys unknown to every command are an error.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::args::Cli;
use crate::UsageError;

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(UsageError(format!("config line {}: expected key=value, got `{line}`", n + 1)));
        };
        let key = key.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            bail!(UsageError(format!("config line {}: empty key", n + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = text.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn takes_value(cmd: &clap::Command, long: &str) -> bool {
    cmd.get_arguments()
        .any(|a| a.get_long() == Some(long) && a.get_action().takes_values())
}

/// Index just past the (nested) subcommand tokens, plus the innermost command.
fn locate_subcommand(argv: &[OsString]) -> Option<(usize, clap::Command)> {
    let mut cmd = Cli::command();
    let mut i = 1;
    let mut found = None;
    while i < argv.len() {
        let text = argv[i].to_string_lossy().into_owned();
        if let Some(flag) = text.strip_prefix("--") {
            let bare = flag.split('=').next().unwrap_or(flag);
            i += if !flag.contains('=') && takes_value(&cmd, bare) { 2 } else { 1 };
            continue;
        }
        match cmd.find_subcommand(&text).cloned() {
            Some(sub) => {
                cmd = sub;
                i += 1;
                found = Some(i);
            }
            None => break,
        }
    }
    found.map(|at| (at, cmd))
}

fn all_longs(cmd: &clap::Command, out: &mut Vec<String>) {
    out.extend(cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)));
    for sub in cmd.get_subcommands() {
        all_longs(sub, out);
    }
}

/// Expand `--config <file>` (if present) into explicit arguments.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))
        .map_err(|e| UsageError(format!("{e:#}")))?;
    let pairs = parse(&text)?;
    let Some((at, cmd)) = locate_subcommand(&argv) else {
        return Ok(argv);
    };
    let mut known = Vec::new();
    all_longs(&Cli::command(), &mut known);
    let explicit = |key: &str| {
        argv.iter().any(|a| {
            let t = a.to_string_lossy();
            t == format!("--{key}") || t.starts_with(&format!("--{key}="))
        })
    };
    let root = Cli::command();
    let (mut global, mut local) = (Vec::new(), Vec::new());
    for (key, value) in pairs {
        if !known.contains(&key) {
            bail!(UsageError(format!("config key `{key}` matches no flag")));
        }
        if key == "config" || explicit(&key) {
            continue;
        }
        let (target, sink) = if root.get_arguments().any(|a| a.get_long() == Some(key.as_str())) {
            (&root, &mut global)
        } else if cmd.get_arguments().any(|a| a.get_long() == Some(key.as_str())) {
            (&cmd, &mut local)
        } else {
            continue;
        };
        if takes_value(target, &key) {
            sink.push(OsString::from(format!("--{key}={value}")));
        } else if matches!(value.as_str(), "true" | "yes" | "1") {
            sink.push(OsString::from(format!("--{key}")));
        }
    }
    let mut out = vec![argv[0].clone()];
    out.extend(global);
    out.extend_from_slice(&argv[1..at]);
    out.extend(local);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let pairs = parse("# defaults\nm = 100\n\n--smax=4\n").unwrap();
        assert_eq!(pairs, vec![("m".into(), "100".into()), ("smax".into(), "4".into())]);
        assert!(parse("no equals sign").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "m = 100\nsmax = 4\nbins = 30\n").unwrap();
        let argv = os(&["rmt-spacing", "--config", path.to_str().unwrap(), "gap", "--kernel", "sine", "--m", "50"]);
        let expanded: Vec<String> = expand(argv)
            .unwrap()
            .into_iter()
            .map(|s| s.into_string().unwrap())
            .collect();
        assert!(expanded.contains(&"--smax=4".to_string()));
        assert!(!expanded.iter().any(|a| a == "--m=100"));
        // `bins` belongs to `fit`, not `gap`.
        assert!(!expanded.iter().any(|a| a.starts_with("--bins")));
        let gap = expanded.iter().position(|a| a == "gap").unwrap();
        assert_eq!(expanded[gap + 1], "--smax=4");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "nonsense = 1\n").unwrap();
        let argv = os(&["rmt-spacing", "--config", path.to_str().unwrap(), "gap"]);
        let err = expand(argv).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
