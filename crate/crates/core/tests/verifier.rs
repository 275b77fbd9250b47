use torus_torsor::verifier::{
    run_suite, Status, VerificationConfig, VerificationReport, CHECK_NAMES,
};
use torus_torsor::Error;

fn quick(name: &str) -> VerificationConfig {
    let mut cfg = VerificationConfig::demo(name).unwrap();
    cfg.numeric.grid = 16;
    cfg
}

fn numeric_fields(r: &VerificationReport) -> Vec<(String, Status, Option<u64>, u64, usize)> {
    r.checks
        .iter()
        .map(|c| {
            (
                c.name.clone(),
                c.status,
                c.max_error.map(f64::to_bits),
                c.tolerance.to_bits(),
                c.samples,
            )
        })
        .collect()
}

#[test]
fn runs_are_bitwise_reproducible() {
    let cfg = quick("principal-g1");
    let (a, b) = (run_suite(&cfg).unwrap(), run_suite(&cfg).unwrap());
    assert_eq!(a.config_digest, b.config_digest);
    assert_eq!(numeric_fields(&a), numeric_fields(&b));
}

#[test]
fn seed_changes_digest_not_outcome() {
    let mut cfg = quick("principal-g1");
    let a = run_suite(&cfg).unwrap();
    cfg.numeric.seed = 99;
    let b = run_suite(&cfg).unwrap();
    assert_ne!(a.config_digest, b.config_digest);
    assert!(a.passed() && b.passed());
}

#[test]
fn checks_run_in_canonical_order() {
    let report = run_suite(&quick("principal-g1")).unwrap();
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, CHECK_NAMES);
}

#[test]
fn report_keys_are_exact_and_ordered() {
    let mut cfg = quick("trivial");
    cfg.checks = Some(vec!["datum_integrality".into()]);
    let json = run_suite(&cfg).unwrap().to_json();
    let top = [
        "\"version\"",
        "\"config_digest\"",
        "\"seed\"",
        "\"overall\"",
        "\"checks\"",
    ];
    let check = [
        "\"name\"",
        "\"status\"",
        "\"max_error\"",
        "\"tolerance\"",
        "\"samples\"",
        "\"wall_time_ms\"",
    ];
    let mut at = 0;
    for key in top.iter().chain(&check) {
        let pos = json[at..]
            .find(key)
            .unwrap_or_else(|| panic!("{key} missing or out of order"));
        at += pos + key.len();
    }
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value.as_object().unwrap().len(), top.len());
    assert_eq!(value["checks"][0].as_object().unwrap().len(), check.len());
}

#[test]
fn subset_selection() {
    let mut cfg = quick("principal-g1");
    cfg.checks = Some(vec!["slice_flatness".into(), "datum_integrality".into()]);
    let report = run_suite(&cfg).unwrap();
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["datum_integrality", "slice_flatness"]);
}

#[test]
fn half_integral_bundle_is_rejected() {
    let cfg = VerificationConfig::from_json(
        r#"{"torus":{"genus":1,"period_matrix":[[[1,0],[0,1]]]},
            "bundle":{"hermitian":[[[0.5,0]]]}}"#,
    )
    .unwrap();
    assert!(matches!(run_suite(&cfg), Err(Error::NonIntegralE { .. })));
}

#[test]
fn malformed_json_is_config_error() {
    assert!(matches!(
        VerificationConfig::from_json("{\"torus\": 3}"),
        Err(Error::ConfigInvalid(_))
    ));
}

#[test]
fn failing_check_does_not_stop_the_suite() {
    // 128⁴ nodes exceeds the grid budget: every grid-based check errors out,
    // the purely algebraic ones still pass.
    let mut cfg = VerificationConfig::demo("principal-g2").unwrap();
    cfg.numeric.grid = 128;
    let report = run_suite(&cfg).unwrap();
    assert_eq!(report.checks.len(), CHECK_NAMES.len());
    assert_eq!(report.overall, Status::Fail);
    let ok = report.check("cycle_integral_anchor").unwrap();
    assert_eq!(ok.status, Status::Pass);
    let broken = report.check("obstruction_sigma").unwrap();
    assert_eq!(broken.status, Status::Fail);
    assert!(broken.max_error.is_none());
    assert!(report.to_json().contains("\"max_error\": null"));
}

#[test]
fn tolerance_below_roundoff_fails() {
    let mut cfg = quick("principal-g1");
    cfg.checks = Some(vec!["obstruction_sigma".into()]);
    cfg.numeric.fd_tol = 1e-20;
    let report = run_suite(&cfg).unwrap();
    assert_eq!(report.overall, Status::Fail);
    assert!(report.checks[0].max_error.unwrap() > 1e-20);
}
