//! The `rmt-spacing` binary: output formats, exit codes and side files.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmt-spacing"))
        .args(args)
        .env("SPECTRAL_CACHE_DIR", cache)
        .output()
        .expect("spawn rmt-spacing")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn quad_dump_integrates_polynomials() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["quad", "dump", "--m", "5", "--interval", "-1,2"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("# {"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 5);
    // int_{-1}^{2} x^4 dx = 33/5.
    let q: f64 = rows.iter().map(|r| r[2] * r[1].powi(4)).sum();
    assert!((q - 6.6).abs() < 1e-12, "{q}");
}

#[test]
fn kernel_eval_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["kernel", "eval", "--kind", "sine", "--x", "0.5", "--y", "0"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn help_lists_subcommands_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--help"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for cmd in ["quad", "kernel", "gap", "lsd", "converge", "surmise", "simulate", "fit", "ratio", "reproduce", "cache"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
    let o = run(dir.path(), &["lsd", "--help"]);
    for flag in ["--kernel", "--class", "--rho", "--Lambda", "--m", "--smax", "--ds", "--out"] {
        assert!(stdout(&o).contains(flag), "missing {flag}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["lsd", "--kernel", "dyn", "--rho", "-1"][..],
        &["lsd", "--kernel", "sine", "--ds", "0.05"],
        &["lsd", "--kernel", "sine", "--class", "goe"],
        &["surmise", "--lambda", "-2"],
        &["frobnicate"],
    ] {
        assert_eq!(code(&run(dir.path(), args)), 2, "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Too few nodes for a nearly-GOE kernel: E(s) stops decreasing.
    let o = run(dir.path(), &["lsd", "--kernel", "dyn", "--rho", "1e-3", "--m", "60", "--smax", "5"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lsd_writes_csv_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gue.csv");
    let o = run(
        dir.path(),
        &["lsd", "--class", "gue", "--m", "40", "--smax", "4", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 401);
    assert!(rows[0][1].abs() < 1e-6, "P(0) = {}", rows[0][1]);
    let side: Value = serde_json::from_slice(&std::fs::read(dir.path().join("gue.csv.json")).unwrap()).unwrap();
    assert!((side["mass"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("gue.csv.manifest.json")).unwrap()).unwrap();
    assert!(manifest["cache_keys"].as_array().is_some_and(|k| !k.is_empty()));
    assert!(manifest["command_line"].as_array().is_some());
}

#[test]
fn gap_output_is_reproducible_and_cached() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gap", "--kernel", "sine", "--m", "30", "--smax", "2"];
    let first = run(dir.path(), &args);
    let second = run(dir.path(), &args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let listing = stdout(&run(dir.path(), &["cache", "list"]));
    assert!(listing.starts_with("1 entries"), "{listing}");
    assert_eq!(code(&run(dir.path(), &["cache", "verify"])), 0);
    assert_eq!(code(&run(dir.path(), &["cache", "clear"])), 0);
    assert!(stdout(&run(dir.path(), &["cache", "list"])).starts_with("0 entries"));
}

#[test]
fn surmise_mc_then_fit_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mc = dir.path().join("mc.csv");
    let o = run(dir.path(), &["surmise", "mc", "--lambda", "0.5", "--n", "50000", "--out", mc.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(dir.path(), &["fit", "--sample", mc.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lambda = fit["lambda_star"].as_f64().unwrap();
    assert!((lambda - 0.5).abs() < 0.05, "{lambda}");
}

#[test]
fn ratio_of_a_curve_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("s.csv");
    let o = run(dir.path(), &["surmise", "--beta", "2", "--smax", "3", "--out", curve.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let c = curve.to_str().unwrap();
    let o = run(dir.path(), &["ratio", "--num", c, "--den", c, "--smin", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&stdout(&o));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[0] >= 0.1 - 1e-12 && (r[1] - 1.0).abs() < 1e-12));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# quadrature\nm = 4\ninterval = 0,2\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(data_rows(&stdout(&run(dir.path(), &["quad", "dump", "--config", c]))).len(), 4);
    assert_eq!(data_rows(&stdout(&run(dir.path(), &["quad", "dump", "--config", c, "--m", "6"]))).len(), 6);
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["quad", "dump", "--config", c, "--m", "3"])), 2);
}

#[test]
fn simulate_writes_spacings_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = run(
        dir.path(),
        &["simulate", "--class", "gue", "--N", "60", "--samples", "20", "--seed", "3", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["spacings.csv", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!((report["mean"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}
