use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run(model: Option<&str>, out: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wavefront"));
    if let Some(m) = model {
        cmd.arg("--model").arg(models().join(m));
    }
    cmd.arg("--out").arg(out).args(args);
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn speed_reports_fisher_minimal_speed() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["speed"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("speed.json"));
    assert!((v["c_star"].as_f64().unwrap() - 2.073444684205341).abs() < 1e-9);
    assert!((v["lambda_star"].as_f64().unwrap() - 0.9071032935762899).abs() < 1e-8);
}

#[test]
fn delay_sweep_is_nonincreasing() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("vector_disease.toml"), dir.path(), &["speed", "--sweep", "tau=0:2:5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("speed_sweep_tau.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,c_star,lambda_star"));
    let speeds: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(speeds.len(), 5);
    assert!(speeds.windows(2).all(|w| w[1] <= w[0]), "{speeds:?}");
}

#[test]
fn malformed_sweep_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["speed", "--sweep", "tau=0:2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn model_without_equilibrium_is_rejected() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("bad.toml");
    fs::write(&model, "[model]\nd = 1.0\nK = 2.0\nexpression = \"v*(1-u)\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wavefront"))
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("speed")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("f(K, K)") || stderr(&o).contains("equilibri"), "{}", stderr(&o));
}

#[test]
fn missing_model_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(None, dir.path(), &["speed"]).status.code(), Some(2));
    assert_eq!(run(Some("no_such_model.toml"), dir.path(), &["speed"]).status.code(), Some(2));
}

#[test]
fn roots_are_written_and_ordered() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["roots", "--c", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("roots.json"));
    let (l1, l2) = (v["lambda1"].as_f64().unwrap(), v["lambda2"].as_f64().unwrap());
    assert!(0.0 < l1 && l1 < l2);
    assert!(v["upsilon"].as_f64().unwrap() > 0.0);
}

#[test]
fn profile_above_minimal_speed() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["profile", "--c", "2.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["profile.csv", "profile_summary.json", "verification.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let v = json(&dir.path().join("profile_summary.json"));
    assert_eq!(v["critical"], serde_json::Value::Bool(false));
    assert!((v["c"].as_f64().unwrap() - 2.5).abs() < 1e-15);
}

#[test]
fn profile_below_minimal_speed_is_refused() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["profile", "--c", "1.0367"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no roots"), "{}", stderr(&o));
    assert!(!dir.path().join("profile.csv").exists());
}

#[test]
fn omitted_speed_takes_critical_path() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["profile"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("profile_summary.json"));
    assert_eq!(v["critical"], serde_json::Value::Bool(true));
    assert!(v["critical_continuation"].is_object() || v["critical_continuation"].is_array());
}

#[test]
fn constant_data_has_no_speed() {
    let dir = TempDir::new().unwrap();
    let o = run(
        Some("fisher.toml"),
        dir.path(),
        &["simulate", "--initial", "constant", "--sites", "200", "--horizon", "10"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("simulation.json"));
    assert!(v["speed"].is_null());
    assert!(v["diagnostic"].is_string());
}

#[test]
fn step_simulation_tracks_front() {
    let dir = TempDir::new().unwrap();
    let o = run(
        Some("fisher.toml"),
        dir.path(),
        &["simulate", "--sites", "400", "--horizon", "80", "--snapshot-every", "1000"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("simulation.json"));
    let speed = v["speed"].as_f64().unwrap();
    assert!((speed - 2.0734).abs() / 2.0734 < 0.05, "{speed}");
    let track = fs::read_to_string(dir.path().join("front_track.csv")).unwrap();
    assert!(track.starts_with("t,x_front"));
    assert!(dir.path().join("snapshots.csv").is_file());
}

#[test]
fn front_reaching_boundary_exits_with_simulation_code() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["simulate", "--sites", "200", "--horizon", "100"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn front_site_outside_lattice_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = run(Some("fisher.toml"), dir.path(), &["simulate", "--sites", "100", "--at", "150"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_writes_dossier() {
    let dir = TempDir::new().unwrap();
    let o = run(
        Some("fisher.toml"),
        dir.path(),
        &["verify", "--sites", "400", "--horizon", "80", "--pairs", "3"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["dossier.json", "front_track.csv", "profile_1.1.csv", "profile_1.5.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["profile", "--c", "3"];
    assert_eq!(run(Some("fisher.toml"), a.path(), &args).status.code(), Some(0));
    assert_eq!(run(Some("fisher.toml"), b.path(), &args).status.code(), Some(0));
    for f in ["profile.csv", "profile_summary.json", "verification.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}
