use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_logshare"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .env("LOGSHARE_THREADS", "2")
        .output()
        .unwrap();
    (output, out)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

/// Data rows of a written table, skipping the `#` header and column row.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn snapshot(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"hitting","variant":"job","n":[100,1000],"replications":8,"seed":11}"#;
    let (first, out) = run(dir.path(), cfg, &["--quiet"]);
    assert_eq!(first.status.code(), Some(0));
    let a = snapshot(&out);
    fs::remove_dir_all(&out).unwrap();
    let (second, _) = run(dir.path(), cfg, &["--quiet"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(a, snapshot(&out));
    assert!(a.iter().any(|(n, _)| n == "hitting_times.csv"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"experiment":"hitting","variant":"job","n":[300],"replications":12}"#).unwrap();
    let mut snaps = Vec::new();
    for threads in ["1", "4"] {
        let status = Command::new(env!("CARGO_BIN_EXE_logshare"))
            .args(["--quiet", "--out"])
            .arg(dir.path().join("out"))
            .arg("--config")
            .arg(&cfg)
            .env("LOGSHARE_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        snaps.push(snapshot(&dir.path().join("out")));
    }
    assert_eq!(snaps[0], snaps[1]);
}

#[test]
fn seed_defaults_to_zero_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), r#"{"experiment":"phases"}"#, &["--quiet"]);
    assert!(o.status.success());
    assert_eq!(report(&out)["config"]["seed"], 0);
    let (o, out) = run(dir.path(), r#"{"experiment":"phases","seed":3}"#, &["--quiet", "--seed", "42"]);
    assert!(o.status.success());
    assert_eq!(report(&out)["config"]["seed"], 42);
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        "not json",
        r#"[1, 2]"#,
        r#"{"experiment":"phases","bogus":1}"#,
        r#"{"experiment":"nope"}"#,
        r#"{"experiment":"initial-phase","lambda":[1,0.55],"mu":[1,1]}"#,
        r#"{"experiment":"fluid","replications":0}"#,
    ] {
        let (o, _) = run(dir.path(), cfg, &[]);
        assert_eq!(o.status.code(), Some(1), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_logshare")).arg("--nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_exponent_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"hitting","variant":"tajine","beta_offset":0.6,"replications":2}"#;
    let (o, _) = run(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn censored_runs_exit_with_three_and_still_write() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"hitting","variant":"job","n":[1000],"cap_factor":0.001,"replications":4}"#;
    let (o, out) = run(dir.path(), cfg, &["--quiet"]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["censored"], true);
    assert!(rows(&out.join("hitting_times.csv")).iter().all(|r| r[3] == "1"));
}

#[test]
fn phase_outputs_match_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), r#"{"experiment":"phases","rho":[0.1,0.2,0.3]}"#, &[]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("PASS continuity"));
    let t: Vec<f64> = rows(&out.join("phase_breakpoints.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(t.len(), 2);
    assert!((t[0] - 0.125).abs() < 1e-12);
    assert!((t[1] - 2.0 / 7.0).abs() < 1e-12);
    let fin: Vec<f64> = rows(&out.join("phase_final.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((fin[0] - 1.0 / 7.0).abs() < 1e-12);
    assert!((fin[1] - 2.0 / 7.0).abs() < 1e-12);
    let header = fs::read_to_string(out.join("phase_final.csv")).unwrap();
    assert!(header.starts_with("# logshare "));
    assert!(header.contains("# config: {"));
}

#[test]
fn oracle_check_reports_total_variation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"oracle-check","truncation":[60,60],"horizon":100000,"burn_in":100}"#;
    let (o, out) = run(dir.path(), cfg, &["--quiet"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let r = report(&out);
    let tv = r["diagnostics"]["tv"].as_f64().unwrap();
    assert!(tv < 0.02, "tv {tv}");
    assert!(r["diagnostics"]["generator_residual"].as_f64().unwrap() < 1e-8);
    let table = rows(&out.join("stationary.csv"));
    let oracle: f64 = table.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!(oracle > 0.99 && oracle <= 1.0 + 1e-9);
}
