use std::path::Path;
use std::process::{Command, Output};

fn nanofiber(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanofiber"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nanofiber(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn columns(csv: &str) -> (Vec<f64>, Vec<f64>) {
    csv.lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .unzip()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn param(result: &serde_json::Value, name: &str) -> f64 {
    result["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == name)
        .unwrap()["value"]
        .as_f64()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        vec!["--help"],
        vec!["spectrum", "--help"],
        vec!["g2", "--help"],
        vec!["hbt", "--help"],
        vec!["decay", "--help"],
        vec!["orbit", "--help"],
        vec!["fit", "--help"],
        vec!["fit", "exp", "--help"],
        vec!["fit", "coincidences", "--help"],
        vec!["fit", "vtype", "--help"],
        vec!["estimate", "--help"],
        vec!["estimate", "atoms", "--help"],
        vec!["estimate", "transit", "--help"],
        vec!["estimate", "localized", "--help"],
    ] {
        ok(&cmd);
    }
}

#[test]
fn vtype_spectrum_has_central_dip_and_fits_back() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("v.csv");
    ok(&["spectrum", "--model", "vtype", "--delta-split", "1.5", "--rabi", "2", "-o", path_str(&file)]);
    let (x, y) = columns(&std::fs::read_to_string(&file).unwrap());
    let centre = y[x.iter().position(|v| v.abs() < 1e-9).unwrap()];
    let max = y.iter().copied().fold(0.0, f64::max);
    assert!(centre < 0.5 * max);
    let fit = json(&ok(&["fit", "vtype", path_str(&file)]));
    assert!((param(&fit, "delta_split") - 1.5).abs() < 0.2);
}

#[test]
fn vtype_fit_uses_given_cross_damping() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("v.csv");
    let args = ["--delta-split", "1.5", "--p", "0.9", "--rabi", "2", "-o", path_str(&file)];
    ok(&[&["spectrum", "--model", "vtype"][..], &args].concat());
    let fit = json(&ok(&["fit", "vtype", path_str(&file), "--p", "0.9"]));
    assert!((param(&fit, "delta_split") - 1.5).abs() < 0.05);
    assert_eq!(nanofiber(&["fit", "vtype", path_str(&file), "--p", "1.5"]).status.code(), Some(2));
}

#[test]
fn weak_drive_spectrum_has_natural_width() {
    let csv = ok(&["spectrum", "--rabi", "0.1", "--from", "-200", "--to", "200", "--points", "40001"]);
    let (x, y) = columns(&csv);
    let max = y.iter().copied().fold(0.0, f64::max);
    let above: Vec<f64> = x.iter().zip(&y).filter(|(_, v)| **v >= 0.5 * max).map(|(x, _)| *x).collect();
    let width = above.last().unwrap() - above[0];
    assert!((width - 5.305).abs() <= 0.02, "{width}");
}

#[test]
fn g2_starts_at_zero() {
    let (d, g) = columns(&ok(&["g2", "--rabi", "13"]));
    assert_eq!(d[0], 0.0);
    assert_eq!(g[0], 0.0);
    assert!(g.iter().any(|v| *v > 1.0));
}

#[test]
fn hbt_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["hbt", "--seed", "7", "--duration", "2000", "--continuous"];
    ok(&[&args[..], &["-o", path_str(&a)]].concat());
    ok(&[&args[..], &["--threads", "3", "-o", path_str(&b)]].concat());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn two_atom_hbt_fits_two_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.csv");
    ok(&["hbt", "--seed", "7", "--mean-atoms", "2", "--continuous", "--duration", "3000", "-o", path_str(&h)]);
    let fit = json(&ok(&["fit", "coincidences", path_str(&h), "--background", "0", "--candidates", "1,2,3"]));
    assert_eq!(fit["n_atoms"], 2);
    assert_eq!(fit["antibunching"], true);
}

#[test]
fn decay_scan_fits_dwell_time() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.csv");
    ok(&["decay", "--seed", "3", "-o", path_str(&d)]);
    let fit = json(&ok(&["fit", "exp", path_str(&d)]));
    let tau = param(&fit, "tau");
    assert!((tau - 180.0).abs() <= 18.0, "{tau}");
}

#[test]
fn orbit_sweep_reports_stability() {
    let csv = ok(&["orbit", "--sweep-L", "10"]);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().ends_with(",stability"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with("stable") || r.ends_with("unstable")));
    let r = json(&ok(&["orbit", "--frequency", "1.5", "--r-ref", "30", "--nu-ref", "1.5"]));
    assert_eq!(r["radius_nm"], 30.0);
}

#[test]
fn estimates() {
    let n = json(&ok(&["estimate", "atoms", "--density", "0.7e9"]));
    assert!((n["mean_atom_number"].as_f64().unwrap() - 0.0264).abs() < 5e-5);
    let t = json(&ok(&["estimate", "transit", "--speed", "10", "--length", "1"]));
    assert_eq!(t["transit_time_us"], 10.0);
}

#[test]
fn exit_codes() {
    assert_eq!(nanofiber(&["hbt"]).status.code(), Some(2), "seed is mandatory");
    assert_eq!(nanofiber(&["--config", "/nonexistent.toml", "g2"]).status.code(), Some(2));
    assert_eq!(nanofiber(&["spectrum", "--model", "bogus"]).status.code(), Some(2));
    assert_eq!(nanofiber(&["orbit", "--L", "1e7"]).status.code(), Some(1), "no orbit in the bracket");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[drive]\nrabbi = 3.0\n").unwrap();
    let out = nanofiber(&["--config", path_str(&cfg), "g2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rabbi"));
}

#[test]
fn config_seed_and_values_are_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[hbt]\nduration = 500.0\n[occupancy]\nkind = \"fixed\"\natoms = 1\n[gating]\noff_period = 1.0\ncycle_period = 1.0\ngate_width = 1.0\n",
    )
    .unwrap();
    let a = ok(&["--config", path_str(&cfg), "hbt"]);
    let b = ok(&["--config", path_str(&cfg), "hbt", "--seed", "5"]);
    assert_eq!(a, b);
    let c = ok(&["--config", path_str(&cfg), "hbt", "--seed", "6"]);
    assert_ne!(a, c);
}
