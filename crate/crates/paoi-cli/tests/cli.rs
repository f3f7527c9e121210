//! End-to-end tests that drive the compiled binary the way a user would:
//! spawn it with a config file, then inspect exit codes and emitted tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn paoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paoi"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Parses a result file: skips `#` manifest lines, returns (header, rows).
fn parse_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let body = fs::read_to_string(path).unwrap();
    let mut lines = body.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .expect("table header")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("missing column {name}"))
}

#[test]
fn simulate_single_deterministic_source_peaks_at_period_plus_service() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "one.toml",
        r#"
            n = 1
            b = 10.0
            [service]
            kind = "deterministic"
            value = 2.0
            [run]
            samples = 200
        "#,
    );
    let out = dir.path().join("sim.csv");
    let r = paoi(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let (header, rows) = parse_table(&out);
    assert_eq!(header, ["source", "k", "paoi"]);
    assert_eq!(rows.len(), 200);
    // Alone on the channel the update leaves immediately, so every peak age
    // is exactly one period plus one service time.
    let paoi_col = col(&header, "paoi");
    for row in &rows {
        let v: f64 = row[paoi_col].parse().unwrap();
        assert!((v - 12.0).abs() < 1e-12, "unexpected peak age {v}");
    }
}

#[test]
fn manifest_replay_reproduces_the_result_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "two.toml",
        r#"
            n = 2
            b = 5.0
            seed = 42
            [service]
            kind = "exponential"
            rate = 1.0
            [run]
            samples = 300
        "#,
    );
    let out1 = dir.path().join("first.csv");
    let r1 = paoi(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert!(r1.status.success());
    let manifest = dir.path().join("first.csv.manifest");
    assert!(manifest.exists(), "manifest should land next to the result");

    // Replay from the manifest alone; no flags, no original config.
    let out2 = dir.path().join("second.csv");
    let r2 = paoi(&[
        "simulate",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(r2.status.success(), "stderr: {}", String::from_utf8_lossy(&r2.stderr));
    assert_eq!(
        fs::read(&out1).unwrap(),
        fs::read(&out2).unwrap(),
        "replayed run must reproduce the result exactly"
    );
    assert_eq!(
        fs::read(&manifest).unwrap(),
        fs::read(dir.path().join("second.csv.manifest")).unwrap()
    );
}

#[test]
fn seed_override_separates_runs_and_reproduces_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seeded.toml",
        r#"
            n = 2
            b = 5.0
            [service]
            kind = "exponential"
            rate = 2.0
            [run]
            samples = 250
        "#,
    );
    let run = |seed: &str, name: &str| -> Vec<u8> {
        let out = dir.path().join(name);
        let r = paoi(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(r.status.success());
        fs::read(&out).unwrap()
    };
    let a1 = run("1", "a1.csv");
    let a2 = run("2", "a2.csv");
    let a3 = run("1", "a3.csv");
    assert_eq!(a1, a3, "same seed must reproduce the same bytes");
    assert_ne!(a1, a2, "different seeds must decorrelate the sample paths");
}

#[test]
fn bound_reports_the_hand_checkable_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "hand.toml",
        r#"
            n = 2
            b = 10.0
            [service]
            kind = "deterministic"
            value = 1.0
            [run]
            pmf = "quadrature"
            [[targets]]
            x = 14.0
            eps = 0.1
            [[targets]]
            x = 14.0
            eps = 0.1
        "#,
    );
    let out = dir.path().join("bounds.csv");
    let r = paoi(&[
        "bound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let (header, rows) = parse_table(&out);
    assert_eq!(rows.len(), 2);
    let ex = col(&header, "long_exhaustive");
    let adm = col(&header, "short_admissible");
    for row in &rows {
        let v: f64 = row[ex].parse().unwrap();
        assert!((v - 0.25).abs() <= 1e-6, "long-regime bound {v} != 0.25");
        assert_eq!(row[adm], "true");
    }
}

#[test]
fn design_l_emits_certified_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dl.toml",
        r#"
            n = 2
            b = 10.0
            [service]
            kind = "deterministic"
            value = 1.0
            [run]
            pmf = "quadrature"
            [[targets]]
            x = 14.0
            eps = 1.0
            [[targets]]
            x = 14.0
            eps = 0.01
        "#,
    );
    let out = dir.path().join("dl.csv");
    let r = paoi(&[
        "design-l",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let (header, rows) = parse_table(&out);
    let mu = col(&header, "mu");
    let bound = col(&header, "bound");
    let eps = col(&header, "eps");
    assert_eq!(rows.len(), 2);
    let mu0: f64 = rows[0][mu].parse().unwrap();
    let mu1: f64 = rows[1][mu].parse().unwrap();
    assert!((mu0 + mu1 - 1.0).abs() <= 1e-9);
    // The demanding source gets the lion's share of the schedule.
    assert!(mu1 > 0.8, "mu1 = {mu1}");
    for row in &rows {
        let b: f64 = row[bound].parse().unwrap();
        let e: f64 = row[eps].parse().unwrap();
        assert!(b <= e, "certified bound {b} exceeds target {e}");
    }
}

#[test]
fn design_s_fails_with_exit_one_when_minimal_weights_overflow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ds.toml",
        r#"
            n = 2
            b = 10.0
            [service]
            kind = "exponential"
            rate = 1.0
            [[targets]]
            x = 20.0
            eps = 0.042
            [[targets]]
            x = 20.0
            eps = 0.042
        "#,
    );
    let out = dir.path().join("ds.csv");
    let r = paoi(&[
        "design-s",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(1), "infeasible designs exit with 1");
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(
        stderr.contains("sum of minimal weights"),
        "stderr should explain the budget overflow, got: {stderr}"
    );
    // The artifacts stay inspectable even on failure.
    assert!(out.exists());
    assert!(dir.path().join("ds.csv.manifest").exists());
}

#[test]
fn opt_search_tabulates_the_feasible_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "opt.toml",
        r#"
            n = 2
            b = 10.0
            [service]
            kind = "deterministic"
            value = 1.0
            [groups]
            sizes = [1, 1]
            weights = [0.5, 0.5]
            [run]
            samples = 100
            grid_step = 0.5
            [[targets]]
            x = 30.0
            eps = 0.1
            [[targets]]
            x = 30.0
            eps = 0.1
        "#,
    );
    let out = dir.path().join("opt.csv");
    let r = paoi(&[
        "opt-search",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let (header, rows) = parse_table(&out);
    assert_eq!(header, ["point", "on_frontier", "gw_0", "gw_1", "cert_0", "cert_1"]);
    // Half steps with one source per group leave a single admissible split.
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "true");
    // Peak age cannot reach 30 here, so the certificates are exact zeros.
    let c0: f64 = rows[0][4].parse().unwrap();
    assert_eq!(c0, 0.0);
}

#[test]
fn validate_reports_every_invariant_green() {
    let r = paoi(&["validate"]);
    assert!(r.status.success());
    let stdout = String::from_utf8_lossy(&r.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 8, "eight invariants expected: {stdout}");
    for line in lines {
        assert!(line.starts_with("invariant "), "odd line: {line}");
        assert!(line.ends_with(" PASS"), "failing invariant: {line}");
    }
}

#[test]
fn config_mistakes_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let out_s = out.to_str().unwrap();

    // Missing file.
    let r = paoi(&["simulate", "--config", "/no/such/file.toml", "--out", out_s]);
    assert_eq!(r.status.code(), Some(2));

    // Unknown service kind.
    let bad_kind = write_config(
        dir.path(),
        "bad_kind.toml",
        r#"
            n = 2
            b = 10.0
            [service]
            kind = "uniform"
            value = 1.0
        "#,
    );
    let r = paoi(&["simulate", "--config", bad_kind.to_str().unwrap(), "--out", out_s]);
    assert_eq!(r.status.code(), Some(2));

    // Target list length matches neither the sources nor the groups.
    let bad_targets = write_config(
        dir.path(),
        "bad_targets.toml",
        r#"
            n = 3
            b = 10.0
            [service]
            kind = "deterministic"
            value = 1.0
            [[targets]]
            x = 14.0
            eps = 0.1
            [[targets]]
            x = 14.0
            eps = 0.1
        "#,
    );
    let r = paoi(&["bound", "--config", bad_targets.to_str().unwrap(), "--out", out_s]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists(), "failed runs must not leave a result file");
}
