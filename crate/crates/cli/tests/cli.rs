use std::path::PathBuf;
use std::process::Command;

fn verify() -> Command {
    Command::new(env!("CARGO_BIN_EXE_verify"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("torus-torsor-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn read_json(path: &PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn trivial_demo_passes_and_writes_report() {
    let out = scratch("trivial.json");
    let status = verify()
        .args(["--demo", "trivial", "--out"])
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let report = read_json(&out);
    assert_eq!(report["overall"], "pass");
    for check in report["checks"].as_array().unwrap() {
        assert!(check["max_error"].as_f64().unwrap() <= 1e-9, "{check}");
    }
}

#[test]
fn principal_g1_demo_passes() {
    let output = verify().args(["--demo", "principal-g1"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("overall: pass"));
    assert!(!stdout.contains("[FAIL]"));
}

#[test]
fn config_file_with_overrides() {
    let cfg = scratch("g1.json");
    std::fs::write(
        &cfg,
        r#"{"torus":{"genus":1,"period_matrix":[[[1,0],[0.3,1.2]]]},
            "bundle":{"hermitian":[[[1.6666666666666667,0]]],"character_turns":[0.25,0.5]}}"#,
    )
    .unwrap();
    let out = scratch("g1-report.json");
    let status = verify()
        .arg("--config")
        .arg(&cfg)
        .args([
            "--grid",
            "16",
            "--seed",
            "11",
            "--checks",
            "obstruction_sigma,slice_flatness",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let report = read_json(&out);
    assert_eq!(report["seed"], 11);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["obstruction_sigma", "slice_flatness"]);
}

#[test]
fn failing_suite_exits_nonzero() {
    let out = scratch("failing.json");
    let status = verify()
        .args([
            "--demo",
            "principal-g1",
            "--checks",
            "obstruction_sigma",
            "--tol",
            "1e-20",
            "--out",
        ])
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert_eq!(read_json(&out)["overall"], "fail");
}

#[test]
fn non_integral_bundle_is_an_error() {
    let cfg = scratch("broken.json");
    std::fs::write(
        &cfg,
        r#"{"torus":{"genus":1,"period_matrix":[[[1,0],[0,1]]]},"bundle":{"hermitian":[[[0.5,0]]]}}"#,
    )
    .unwrap();
    let output = verify().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("not integral"));
}

#[test]
fn output_dir_override_applies_to_relative_paths() {
    let dir = scratch("redirected");
    std::fs::create_dir_all(&dir).unwrap();
    let status = verify()
        .env("TORUS_TORSOR_OUT_DIR", &dir)
        .args([
            "--demo",
            "trivial",
            "--checks",
            "datum_integrality",
            "--out",
            "report.json",
        ])
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    assert!(dir.join("report.json").exists());
}

#[test]
fn unknown_demo_is_rejected_by_the_parser() {
    let status = verify()
        .args(["--demo", "nope"])
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(!status.success());
}
