use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

use sbd::matrix_io::read_matrix;
use sbd::output::{Manifest, TraceTable, TRACE_FILES};

fn sbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

/// The 16x4 smoke configuration with every path under `dir`.
fn smoke(dir: &Path, seed: u64) -> serde_json::Value {
    let sim = dir.join("sim");
    json!({
        "model": { "observed_rows": 16, "observed_cols": 4, "blur_length": 6 },
        "sampler": { "alpha": 0.5, "iterations": 200, "seed": seed, "hmc": { "steps": 10, "eps": 0.02 }, "ess_max_lag": 50 },
        "io": {
            "data": sim.join("data.csv"),
            "image_obs": sim.join("image_obs.csv"),
            "truth": sim.join("truth.json"),
            "out_dir": dir.join("chain")
        },
        "simulate": { "factor": 4 }
    })
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_sample_diagnose_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "smoke.json", &smoke(tmp.path(), 7));
    let cfg = cfg.to_str().unwrap();
    let sim = tmp.path().join("sim");
    assert_ok(&sbd(&["simulate", "--config", cfg, "--out", sim.to_str().unwrap()]));
    for f in ["data.csv", "image_obs.csv", "truth_image.csv", "truth.json", "manifest.json"] {
        assert!(sim.join(f).is_file(), "missing {f}");
    }
    assert_eq!(read_matrix(&sim.join("data.csv")).unwrap().rows, 16);

    assert_ok(&sbd(&["sample", "--config", cfg]));
    let chain = tmp.path().join("chain");
    let man = Manifest::read(&chain).unwrap();
    assert_eq!(man.seed, 7);
    assert!(!man.config_hash.is_empty());
    for f in &man.files {
        assert!(chain.join(f).is_file(), "declared file {f} missing");
    }
    for f in TRACE_FILES {
        let t = TraceTable::read(&chain.join(f)).unwrap();
        assert_eq!(t.rows.len(), 200, "{f}");
    }
    assert_eq!(TraceTable::read(&chain.join("omega.csv")).unwrap().names.len(), 6);

    assert_ok(&sbd(&["diagnose", "--config", cfg]));
    let diag = std::fs::read_to_string(chain.join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = diag.lines().collect();
    assert_eq!(lines[0], "parameter,n,mean,sd,q025,median,q975,ess,msjd,rmse");
    assert_eq!(lines.len(), 1 + 6 + 3);
    let rmse: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!(rmse.is_finite() && rmse >= 0.0);
}

#[test]
fn identical_seed_gives_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "smoke.json", &smoke(tmp.path(), 3));
    let cfg = cfg.to_str().unwrap();
    assert_ok(&sbd(&["simulate", "--config", cfg, "--out", tmp.path().join("sim").to_str().unwrap()]));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&sbd(&["sample", "--config", cfg, "--out", a.to_str().unwrap()]));
    assert_ok(&sbd(&["sample", "--config", cfg, "--out", b.to_str().unwrap()]));
    let files = Manifest::read(&a).unwrap().files;
    assert!(files.len() >= TRACE_FILES.len());
    for f in files {
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{f} differs");
    }
    let c = tmp.path().join("c");
    assert_ok(&sbd(&["sample", "--config", cfg, "--seed", "4", "--out", c.to_str().unwrap()]));
    assert_ne!(std::fs::read(a.join("omega.csv")).unwrap(), std::fs::read(c.join("omega.csv")).unwrap());
}

#[test]
fn unknown_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = smoke(tmp.path(), 1);
    cfg["sampler"]["itrations"] = json!(10);
    let p = write_config(tmp.path(), "bad.json", &cfg);
    let out = sbd(&["sample", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("itrations"));
}

#[test]
fn invalid_value_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = smoke(tmp.path(), 1);
    cfg["model"]["blur_correlation"] = json!({ "phi": 2.0, "p": 2.5 });
    let p = write_config(tmp.path(), "bad.json", &cfg);
    let out = sbd(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.blur_correlation.p"));
}

#[test]
fn missing_data_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "smoke.json", &smoke(tmp.path(), 1));
    let out = sbd(&["sample", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn model_error_exits_with_model_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke(tmp.path(), 1);
    let p = write_config(tmp.path(), "smoke.json", &cfg);
    assert_ok(&sbd(&["simulate", "--config", p.to_str().unwrap(), "--out", tmp.path().join("sim").to_str().unwrap()]));
    let mut long_blur = cfg.clone();
    long_blur["model"]["blur_length"] = json!(40);
    let p = write_config(tmp.path(), "long.json", &long_blur);
    let out = sbd(&["sample", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn constraint_sweep_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "model": { "observed_rows": 24, "observed_cols": 1, "pad_rows": 0, "pad_cols": 0, "blur_length": 10 },
        "sampler": { "iterations": 300, "burn_in": 100, "seed": 5, "ess_max_lag": 50 },
        "io": { "out_dir": tmp.path().join("sweep") },
        "experiment": { "m_values": [0, 24], "alpha_values": [0, 1] }
    });
    let p = write_config(tmp.path(), "sweep.json", &cfg);
    assert_ok(&sbd(&["experiment", "constraint-sweep", "--config", p.to_str().unwrap()]));
    let modes = std::fs::read_to_string(tmp.path().join("sweep/constraint_modes.csv")).unwrap();
    assert_eq!(modes.lines().count(), 1 + 4);
    let mixing = std::fs::read_to_string(tmp.path().join("sweep/constraint_mixing.csv")).unwrap();
    assert!(mixing.lines().count() > 4);
    let man = Manifest::read(&tmp.path().join("sweep")).unwrap();
    assert_eq!(man.seed, 5);
}
