use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_fgrnls");

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("fgrnls-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn small_config(extra: &str) -> String {
    format!(
        r#"
[model]
points = 512

[simulation]
t_end = 0.5
dt = 0.001
stride = 50
initial = {{ kind = "modes", amplitudes = [[0.05, 0.0], [0.0, 0.03]] }}

{extra}
"#
    )
}

fn fgrnls(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("FGRNLS_OUT_DIR", dir.join("out")).output().unwrap()
}

fn with_config(dir: &Path, sub: &str, text: &str) -> Output {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    fgrnls(dir, &[sub, "--config", p.to_str().unwrap()])
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn resonance_check_from_eigenvalues() {
    let dir = scratch("lambda");
    let ok = fgrnls(&dir, &["resonance-check", "--lambda", "0,0.7", "--c", "0.7875"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["N"], 1);
    assert!(!v["minimal"].as_array().unwrap().is_empty());

    let bad = fgrnls(&dir, &["resonance-check", "--lambda", "0,2", "--c", "2.25"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = fgrnls(&dir, &["resonance-check", "--lambda", "0,0.7"]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn usage_and_config_errors_exit_4() {
    let dir = scratch("usage");
    assert_eq!(fgrnls(&dir, &["no-such-command"]).status.code(), Some(4));
    assert_eq!(fgrnls(&dir, &["pipeline", "--config", "/nonexistent/run.toml"]).status.code(), Some(4));
    let out = with_config(&dir, "pipeline", "[model]\nwidth = 3\n");
    assert_eq!(out.status.code(), Some(4));
    let out = with_config(&dir, "simulate", &small_config("").replace("dt = 0.001", "dt = -1.0"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn spectrum_prints_the_levels() {
    let dir = scratch("spectrum");
    let out = fgrnls(&dir, &["spectrum", "--points", "512"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "index,lambda,lambda_minus_c");
    assert_eq!(rows.len(), 3);
    let l1: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((l1 - 0.7).abs() < 1e-3);
    assert!(dir.join("out/spectrum.csv").exists());
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = scratch("pipeline");
    let out = with_config(&dir, "pipeline", &small_config(""));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    for s in ["spectrum", "resonance", "normalform", "fgr", "simulate"] {
        assert!(m["stages"][s].is_object(), "{s}");
    }
    assert_eq!(m["stages"]["fgr"]["h9_prime"], "holds");
    for f in ["spectrum.csv", "resonance.json", "normalform.json", "fgr.json", "rayleigh.csv", "trajectory.csv"] {
        assert!(dir.join("out").join(f).exists(), "{f}");
    }
    let traj = fs::read_to_string(dir.join("out/trajectory.csv")).unwrap();
    let head = traj.lines().next().unwrap();
    assert!(head.starts_with("t,re_z0,im_z0,re_z1,im_z1,re_zeta0"));
    assert!(head.ends_with("fgr_source,balance_residual"));
    assert_eq!(traj.lines().count(), 1 + 11);
}

#[test]
fn linear_runs_skip_the_normal_form() {
    let dir = scratch("linear");
    let out = with_config(&dir, "pipeline", &small_config("[forcing]\ngamma0 = 0.0\ngamma1 = 0.0\n"));
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&dir);
    assert_eq!(m["stages"]["normalform"]["skipped"], "linear");
    assert_eq!(m["stages"]["fgr"]["skipped"], "linear");
    assert!(m["stages"]["simulate"]["mass_drift"].as_f64().unwrap() < 1e-10);
}

#[test]
fn hypothesis_failure_halts_with_a_witness() {
    let dir = scratch("hypothesis");
    // a huge resonance tolerance makes the default spectrum look resonant
    let out = with_config(&dir, "pipeline", &small_config("[analysis]\ntol_res = 0.5\n"));
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(&dir);
    assert_eq!(m["status"], "incomplete");
    assert_eq!(m["error"]["exit_code"], 2);
    assert_eq!(m["error"]["stage"], "resonance");
    assert_eq!(m["stages"]["resonance"]["verdict"], "violated");
    assert!(!m["stages"]["resonance"]["hypotheses"]["violations"].as_array().unwrap().is_empty());
    assert!(m["stages"].get("normalform").is_none());
}

#[test]
fn runs_are_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let cfg = small_config("");
    assert_eq!(with_config(&a, "simulate", &cfg).status.code(), Some(0));
    assert_eq!(with_config(&b, "simulate", &cfg).status.code(), Some(0));
    let ta = fs::read(a.join("out/trajectory.csv")).unwrap();
    let tb = fs::read(b.join("out/trajectory.csv")).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
}

#[test]
fn output_dir_falls_back_to_the_config() {
    let dir = scratch("outdir");
    let target = dir.join("elsewhere");
    let p = dir.join("run.toml");
    fs::write(&p, small_config(&format!("[output]\ndir = {:?}\n", target.to_str().unwrap()))).unwrap();
    let out = Command::new(BIN).args(["spectrum", "--config", p.to_str().unwrap()]).env_remove("FGRNLS_OUT_DIR").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("manifest.json").exists());
}
