use std::path::Path;
use std::process::{Command, Output};

use nonbark::series::{Format, WeakValueSeries};

fn nonbark(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonbark"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NONBARK_OUT")
        .output()
        .expect("binary runs")
}

fn read_series(path: &Path, format: Format) -> WeakValueSeries {
    WeakValueSeries::parse(&std::fs::read_to_string(path).unwrap(), format).unwrap()
}

#[test]
fn lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonbark(&["preset", "--list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig2", "fig3", "atom-growth", "checks"] {
        assert!(text.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn fig2_csv_reparses_with_expected_peak() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonbark(&["preset", "fig2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_series(&dir.path().join("fig2_T6_A.csv"), Format::Csv);
    let peak = s.peak().unwrap();
    assert!((peak.abs_w - 14.10).abs() <= 0.01, "peak {}", peak.abs_w);
    assert!((peak.coord - 200.0).abs() < 1e-9);
    assert_eq!(s.metadata.mode, "closed_form");
    assert_eq!(s.metadata.params["tunnel"]["k0"], 5000.0);
}

#[test]
fn fig3_peak_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonbark(&["preset", "fig3", "--format", "json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let b = read_series(&dir.path().join("fig3_T14_B.json"), Format::Json).peak().unwrap();
    let d = read_series(&dir.path().join("fig3_T14_D.json"), Format::Json).peak().unwrap();
    assert!((d.abs_w / b.abs_w / 26.0 - 1.0).abs() < 0.01);
    assert!((b.coord - 200.0).abs() < 1e-9 && (d.coord - 600.0).abs() < 1e-9);
}

#[test]
fn outputs_are_deterministic_across_runs_and_pool_sizes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(nonbark(&["preset", "fig1", "--jobs", "1"], a.path()).status.success());
    assert!(nonbark(&["preset", "fig1", "--jobs", "4"], b.path()).status.success());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn atom_growth_preset() {
    let dir = tempfile::tempdir().unwrap();
    assert!(nonbark(&["preset", "atom-growth"], dir.path()).status.success());
    let w6 = read_series(&dir.path().join("atom-growth_w0_n0.csv"), Format::Csv);
    let w8 = read_series(&dir.path().join("atom-growth_w1_n0.csv"), Format::Csv);
    let mid = |s: &WeakValueSeries| s.samples[s.samples.len() / 2].abs_w;
    let ratio = mid(&w8) / mid(&w6);
    let e2 = std::f64::consts::E.powi(2);
    assert!(ratio >= 0.8 * e2 && ratio <= 1.2 * e2, "ratio {ratio}");
    // boundary zeros
    for s in [&w6, &w8] {
        assert_eq!(s.samples[0].abs_w, 0.0);
        assert_eq!(s.samples.last().unwrap().abs_w, 0.0);
    }
}

#[test]
fn env_overrides_out() {
    let (flag, env) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = Command::new(env!("CARGO_BIN_EXE_nonbark"))
        .args(["preset", "atom-growth", "--out"])
        .arg(flag.path())
        .env("NONBARK_OUT", env.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env.path().join("atom-growth_w0_n0.csv").exists());
    assert_eq!(std::fs::read_dir(flag.path()).unwrap().count(), 0);
}

#[test]
fn config_errors_exit_2_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"model": "tunnel_closed", "tunnel": {"b": 1, "mu": 1000, "kappa": -5, "k0": 5000, "L": 100}, "post_times": [6]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = nonbark(&["run", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tunnel.kappa"));
    assert!(!out_dir.exists());

    let out = nonbark(&["preset", "fig9"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let out = nonbark(&["run", dir.path().join("missing.json").to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let out = nonbark(&["preset", "fig2", "--format", "xml"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn quadrature_scenario_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("quad.json");
    std::fs::write(
        &cfg,
        r#"{
            "name": "quad", "model": "tunnel_quadrature",
            "tunnel": {"b": 1, "mu": 1000, "kappa": 1000, "k0": 5000, "L": 100},
            "post_times": [6],
            "targets": [{"name": "A", "spot": [1, 1], "half_width": 0.5, "points": 101}],
            "format": "json"
        }"#,
    )
    .unwrap();
    let out = nonbark(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_series(&dir.path().join("quad_T6_A.json"), Format::Json);
    assert_eq!(s.samples.len(), 101);
    assert!((s.peak().unwrap().abs_w - 14.1047).abs() < 1e-3);
    assert_eq!(s.metadata.mode, "quadrature");
}

#[test]
fn fast_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonbark(&["check", "--fast", "--seed", "3"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!stdout.contains("FAIL"));
    assert!(dir.path().join("checks.json").exists());
}

#[test]
fn grid_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = nonbark(&["sweep", "pde-grid", "--fast"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("sweep_pde-grid.csv")).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((3.0..=5.0).contains(&last[3]), "reduction {}", last[3]);
}
