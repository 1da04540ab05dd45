use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavetails"))
}

fn repo_config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    bin().arg("--out").arg(out_dir).args(args).output().expect("binary runs")
}

const SMALL: &str = r#"
schema_version = 1
l = 1
epsilons = [0.05, 0.025]
observers = [2.0]

[grid]
dr = 0.0625
t_max = 40.0

[[bumps]]
amplitude = 0.2
center = 0.0
half_width = 1.0
smoothness = 8

[[bumps]]
amplitude = -0.12
center = -0.3
half_width = 0.35
smoothness = 8

[[terms]]
p = 3

[fit]
window = [10.0, 32.0]
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn predict_reports_the_anomalous_term() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = repo_config("l1_p2.toml");
    let out = run(&["predict", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    let term = &v["prediction"]["terms"][0];
    assert_eq!(term["case_label"], "p2-second-order");
    assert_eq!(term["eps_order"], 3);
    assert_eq!(term["gamma"], 4);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let l0 = write_config(tmp.path(), "l0.toml", &SMALL.replace("l = 1", "l = 0"));
    let p1 = write_config(tmp.path(), "p1.toml", &SMALL.replace("p = 3", "p = 1"));
    let missing = tmp.path().join("nope.toml");
    for cfg in [&l0, &p1, &missing] {
        let out = run(&["predict", "--config", cfg.to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn identity_exit_codes_follow_the_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["identity"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["max_rel_err"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["rows"], 3 * 7 * 20);

    let out = run(&["identity", "--threshold", "1e-16"], tmp.path());
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["identity", "--l", ""], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("identity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("# schema_version=1"));
}

#[test]
fn duhamel_writes_ratios_and_flags_points_inside_the_pulse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = run(
        &["duhamel", "--config", cfg.to_str().unwrap(), "--points", "2:2,200:2"],
        tmp.path(),
    );
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["errors"], 1);
    let points = v["points"].as_array().unwrap();
    assert!(points[0]["error"].is_string());
    let ratio = points[1]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    let csv = std::fs::read_to_string(tmp.path().join("small/duhamel.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("t,r,value,predicted,ratio"));
}

#[test]
fn evolve_then_fit_matches_verify_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();

    let out = run(&["evolve", "--config", cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for sub in ["eps_+0.05", "eps_-0.05", "eps_+0.025", "eps_-0.025", "free"] {
        let text = std::fs::read_to_string(tmp.path().join("small").join(sub).join("r_2.csv")).unwrap();
        assert!(text.starts_with("# schema_version=1 kind=observer"));
    }
    let fit = run(&["fit", "--config", cfg], tmp.path());
    let fit_json = json(&fit);

    let other = tempfile::tempdir().unwrap();
    let verify = bin()
        .env("WAVETAILS_OUT", other.path())
        .args(["verify", "--config", cfg])
        .output()
        .unwrap();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(other.path().join("small/report.json")).unwrap()).unwrap();
    assert_eq!(report, json(&verify));
    assert_eq!(report["measurement"], fit_json["measurement"]);
    assert_eq!(report["config_hash"], fit_json["config_hash"]);
    assert_eq!(fit.status.code(), verify.status.code());

    let again = bin()
        .env("WAVETAILS_OUT", other.path())
        .args(["verify", "--config", cfg])
        .output()
        .unwrap();
    assert_eq!(json(&again), report);
}

#[test]
fn fit_rejects_series_from_another_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    assert!(run(&["evolve", "--config", cfg.to_str().unwrap(), "--eps", "0.05"], tmp.path())
        .status
        .success());
    let changed = write_config(tmp.path(), "small.toml", &SMALL.replace("amplitude = 0.2", "amplitude = 0.21"));
    let out = run(&["fit", "--config", changed.to_str().unwrap(), "--eps", "0.05"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn symmetric_bump_is_degenerate_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "[[bumps]]\namplitude = -0.12\ncenter = -0.3\nhalf_width = 0.35\nsmoothness = 8\n",
        "",
    );
    let cfg = write_config(tmp.path(), "sym.toml", &text);
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--eps", "0.05"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["verdict"], "degenerate");
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}
