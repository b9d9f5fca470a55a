use granspec::export::read_profile_bin;
use granspec::velocity_grid::{build_grid, maxwellian};
use serde_json::Value;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("granspec-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(out: &PathBuf, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_granspec"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rejects_out_of_range_restitution() {
    let out = scratch("alpha");
    let o = run(&out, &["--set", "alpha=1.2", "equilibrium"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = scratch("missing");
    let o = run(&out, &["--config", "/nonexistent/granspec.toml", "equilibrium"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&out, &["--set", "bogus", "equilibrium"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn elastic_equilibrium_is_the_grid_maxwellian() {
    let out = scratch("elastic");
    let o = run(&out, &["--set", "n=12", "--set", "alpha=1", "equilibrium"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_profile_bin(&out.join("profile.bin")).unwrap();
    let g = build_grid(2, 8.0, 12).unwrap();
    assert_eq!(f.grid, g);
    let m = maxwellian(&g, 1.0, &[0.0, 0.0], 1.0).unwrap();
    let diff = f.values.iter().zip(&m.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-14, "{diff}");
    let meta = json(out.join("equilibrium.json"));
    assert_eq!(meta["converged"], Value::Bool(true));
    assert!(meta["meta"]["config_hash"].is_string());
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.starts_with("# granspec "));
    assert!(csv.lines().nth(1).unwrap().starts_with("# config_hash="));
    assert!(out.join("profile.bin.json").exists());
}

#[test]
fn equilibrium_output_is_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let args = ["--set", "n=12", "--set", "alpha=0.9", "equilibrium"];
    assert_eq!(run(&a, &args).status.code(), Some(0));
    assert_eq!(run(&b, &args).status.code(), Some(0));
    assert_eq!(fs::read(a.join("profile.bin")).unwrap(), fs::read(b.join("profile.bin")).unwrap());
}

#[test]
fn dispersion_reports_closed_form_values() {
    let out = scratch("dispersion");
    let o = run(&out, &["dispersion"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(out.join("dispersion.json"));
    assert!((v["e1_analytic"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!(v["det_vs_cubic_max_relative_error"].as_f64().unwrap() <= 1e-12);
    let roots = v["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 3);
    assert!(roots.iter().any(|r| r[0].as_f64() == Some(0.0) && r[1].as_f64() == Some(0.0)));
}

#[test]
fn elastic_spectrum_tracks_four_branches() {
    let out = scratch("spectrum");
    let o = run(&out, &["--set", "n=12", "--set", "alphas=1", "--set", "rho_steps=9", "spectrum", "--matrix"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(out.join("fits.json"));
    let fits = v["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 4);
    assert!(out.join("branches.csv").exists() && out.join("plot.csv").exists());
    assert!(out.join("operator_alpha1.bin").exists() && out.join("operator_alpha1.bin.json").exists());
}

#[test]
fn coarse_verification_fails_cleanly() {
    let out = scratch("verify");
    let o = run(&out, &["--set", "n=8", "--set", "rho_steps=5", "verify"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL]"));
    assert!(out.join("verify.json").exists());
}
