use std::path::Path;
use std::process::{Command, Output};

fn imageset(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imageset"))
        .args(args)
        .current_dir(dir)
        .env_remove("IMAGESET_SEED")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bounds_reports_sample_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = imageset(dir.path(), &["bounds", "--eps", "0.1", "--delta", "0.01", "--family", "ellipsoid", "--n", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["d"], 5);
    assert_eq!(v["n_explicit"], 152);
    assert!(v["n_exact"].as_u64().unwrap() <= 152);
}

#[test]
fn bad_parameters_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = imageset(dir.path(), &["bounds", "--eps", "1.5", "--delta", "0.01", "--family", "box", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = imageset(dir.path(), &["approximate", "--model", "no-such-model.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn model_parse_errors_carry_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"n": 1, "n_w": 1, "dynamics": ["x1 +* w1"], "X0": {"lower": [0], "upper": [1]},
                    "W": {"lower": [0], "upper": [0.1]}}"#;
    std::fs::write(dir.path().join("m.json"), model).unwrap();
    let out = imageset(dir.path(), &["approximate", "--model", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1:5") || err.contains("column 5"), "{err}");
}

#[test]
fn approximate_writes_result_cloud_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = imageset(
        dir.path(),
        &["approximate", "--model", "sysF", "--family", "box", "--N", "50", "--cloud", "cloud.csv", "--seed", "3"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("result.json"));
    assert_eq!(r["certificate"]["n"], 50);
    assert_eq!(r["set"]["kind"], "nas");
    let cloud = std::fs::read_to_string(dir.path().join("cloud.csv")).unwrap();
    assert_eq!(cloud.lines().count(), 51);
    let m = json(&dir.path().join("result.json.manifest.json"));
    let cmd: Vec<&str> = m["command"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(&cmd[cmd.len() - 2..], ["--seed", "3"]);
    assert!(cmd.contains(&"--out"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn pas_result_reports_gram_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let out = imageset(dir.path(), &["approximate", "--model", "sysF", "--family", "pas", "--degree", "2", "--N", "40"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("result.json"));
    let eigs = r["gram_min_eigenvalues"].as_array().unwrap();
    assert!(!eigs.is_empty());
    assert!(r["solver"]["status"].is_string());
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_imageset"))
        .args(["approximate", "--model", "sysF", "--N", "30"])
        .current_dir(dir.path())
        .env("IMAGESET_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("result.json"))["seed"], 11);
}

#[test]
fn filter_trace_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = imageset(
        dir.path(),
        &["filter", "--model", "abrc08", "--simulate", "--x0", "0.6,0.07", "--K", "4", "--summary", "s.json", "--truth", "truth.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("k,c1,c2,P11,P12,P21,P22,logvol,lo1,hi1,lo2,hi2,N_drawn"));
    assert!(lines[1].ends_with(",corrected"));
    let s = json(&dir.path().join("s.json"));
    assert_eq!(s["steps"].as_array().unwrap().len(), 4);
}

#[test]
fn filter_reads_measurements_and_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.csv"), "y1\n0.7\n0.8\n0.6\n").unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"family": "box", "samples": {"policy": "fixed", "n": 300}, "initial": {"center": [0.6, 0.07], "radius": 6.8}}"#,
    )
    .unwrap();
    let out = imageset(dir.path(), &["filter", "--model", "abrc08", "--config", "cfg.json", "--measurements", "y.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
    assert!(trace.lines().nth(1).unwrap().split(',').nth(12) == Some("300"));
    let m = json(&dir.path().join("trace.csv.manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn inconsistent_measurement_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.csv"), "y1\n1000\n").unwrap();
    let out = imageset(dir.path(), &["filter", "--model", "abrc08", "--measurements", "y.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.lines().nth(1).unwrap().ends_with(",inconsistent"));

    let out = imageset(
        dir.path(),
        &["filter", "--model", "abrc08", "--measurements", "y.csv", "--continue-on-inconsistent"],
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = imageset(dir.path(), &["approximate", "--model", "sysF", "--family", "parallelotope", "--N", "80", "--cloud", "c.csv"]);
    assert!(out.status.success());
    let out = imageset(dir.path(), &["replay", "--manifest", "result.json.manifest.json", "--out-dir", "again"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(
        std::fs::read(dir.path().join("result.json")).unwrap(),
        std::fs::read(dir.path().join("again/result.json")).unwrap()
    );

    std::fs::write(dir.path().join("result.json"), "tampered").unwrap();
    std::fs::write(
        dir.path().join("result.json.manifest.json"),
        std::fs::read_to_string(dir.path().join("result.json.manifest.json"))
            .unwrap()
            .replace("\"80\"", "\"81\""),
    )
    .unwrap();
    let out = imageset(dir.path(), &["replay", "--manifest", "result.json.manifest.json", "--out-dir", "changed"]);
    assert_eq!(out.status.code(), Some(3));
}
