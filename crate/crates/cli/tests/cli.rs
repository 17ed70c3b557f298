use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bpskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpskit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const GAUSS: &str = r#"{
    "target": {"family": "gaussian", "dimension": 2},
    "policy": {"kind": "constant", "lambda_ref": 1.0},
    "horizon": {"duration": 10.0},
    "seed": 11,
    "chains": 4
}"#;

#[test]
fn sample_is_byte_reproducible_and_estimates_pool() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSS);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = bpskit(&["sample", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for c in 0..4 {
        let name = format!("chain_{c}.jsonl");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
        let last = fs::read_to_string(a.join(&name)).unwrap().lines().last().unwrap().to_owned();
        let event: serde_json::Value = serde_json::from_str(&last).unwrap();
        assert_eq!(event["t"], 10.0);
        assert_eq!(event["kind"], "final");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["chains"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let files: Vec<String> = (0..4).map(|c| a.join(format!("chain_{c}.jsonl")).to_str().unwrap().to_owned()).collect();
    let mut args = vec!["estimate"];
    args.extend(files.iter().map(String::as_str));
    let o = bpskit(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["chains"], 4);
    let names: Vec<&str> = report["functions"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["x0", "x1", "x0^2", "x1^2"]);
    assert_eq!(bpskit(&args).stdout, o.stdout);
}

#[test]
fn mixed_trajectories_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSS);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    bpskit(&["sample", "--config", &cfg, "--out", a.to_str().unwrap()]);
    let other = GAUSS.replace("\"lambda_ref\": 1.0", "\"lambda_ref\": 3.0");
    let cfg = write_config(dir.path(), &other);
    bpskit(&["sample", "--config", &cfg, "--out", b.to_str().unwrap()]);
    let o = bpskit(&[
        "estimate",
        a.join("chain_0.jsonl").to_str().unwrap(),
        b.join("chain_0.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &GAUSS.replace("gaussian", "cauchy"));
    let o = bpskit(&["sample", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let with_transform = GAUSS.replace("\"seed\"", "\"transform\": {\"kind\": \"exp\"}, \"seed\"");
    let cfg = write_config(dir.path(), &with_transform);
    let o = bpskit(&["sample", "--config", &cfg, "--out", dir.path().join("y").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = bpskit(&["sample", "--config", &cfg, "--force", "--out", dir.path().join("y").to_str().unwrap()]);
    assert!(o.status.success());
}

#[test]
fn missing_files_exit_with_four() {
    let o = bpskit(&["estimate", "/nonexistent/chain_0.jsonl"]);
    assert_eq!(o.status.code(), Some(4));
    let o = bpskit(&["sample", "--config", "/nonexistent.json", "--out", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn diagnose_student_t_advises_exponential_transform() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "target": {"family": "student_t", "dimension": 2, "parameters": {"k": 4.0}},
        "policy": {"kind": "constant", "lambda_ref": 1.0},
        "drift": {"radii": [10.0, 20.0], "directions": 4, "angles": 17}
    }"#;
    let cfg = write_config(dir.path(), body);
    let o = bpskit(&["diagnose", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["advice"]["regime"], "thick-i");
    assert_eq!(report["advice"]["transform"]["kind"], "exp");
    assert!(String::from_utf8_lossy(&o.stderr).contains("radius"));
}

#[test]
fn transform_check_passes() {
    let o = bpskit(&["transform-check", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        bpskit::config::RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}
