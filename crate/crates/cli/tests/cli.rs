use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn poisfam(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poisfam"))
        .current_dir(dir)
        .env_remove("POISFAM_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn verify_lv3() {
    let dir = tempfile::tempdir().unwrap();
    let out = poisfam(dir.path(), &["run", "verify", "lv3", "--points", "1000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path());
    assert!(f(&r["verification"]["jacobi_max_normalized"]) <= 1e-6);
    assert_eq!(r["verification"]["rank_histogram"], serde_json::json!([0, 0, 1000, 0]));
    assert_eq!(r["passed"], true);
}

#[test]
fn reduce_lv3_at_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = poisfam(dir.path(), &["run", "reduce", "lv3", "--x", "1,2,3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    let y: Vec<f64> = r["reduction"]["y"].as_array().unwrap().iter().map(f).collect();
    assert_eq!(y[..2], [1.0, 2.0]);
    assert!((y[2] - 1.0 / 3.0).abs() <= 1e-15);
    assert!(f(&r["reduction"]["canonical_deviation"]) <= 1e-6);
    // J12 at (1,2,3) is 1·2·(1 − 2)
    assert!((f(&r["reduction"]["reparam_factor"]) + 2.0).abs() <= 1e-12);
}

#[test]
fn nlv_short_run_conserves() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "integrate",
        "nlv",
        "--n",
        "5",
        "--a",
        "1,1,1,1,1",
        "--b",
        "1,2,3,4,5",
        "--x0",
        "1,2,3,4,5",
    ];
    let out = poisfam(dir.path(), &[&args[..], &["--t-end", "0.002"]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,x3,x4,x5,H,C3,C4,C5"));
    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(last[0], 0.002);
    let r = report(dir.path());
    assert!(f(&r["integration"]["hamiltonian_drift"]) <= 1e-6);
    for v in r["integration"]["casimir_drifts"].as_object().unwrap().values() {
        assert!(f(v) <= 1e-6);
    }
}

/// The solution from (1,..,5) blows up near t = 0.029, so a horizon of 5
/// leaves the domain; the run reports the failure and keeps the partial table.
#[test]
fn nlv_long_horizon_reports_domain_exit() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "integrate",
        "nlv",
        "--n",
        "5",
        "--a",
        "1,1,1,1,1",
        "--b",
        "1,2,3,4,5",
        "--x0",
        "1,2,3,4,5",
        "--t-end",
        "5",
    ];
    let out = poisfam(dir.path(), &args);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["integration"]["status"], "domain-exit");
    assert_eq!(check(&r, "integration_completed")["pass"], false);
    assert!(f(&r["integration"]["t_reached"]) < 0.029);
    assert!(f(&r["integration"]["hamiltonian_drift"]) <= 1e-6);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run", "all", "qp-lv3", "--c", "2,1,1", "--points", "150", "--seed", "4", "--t-end", "0.005",
    ];
    let read = |sub: &str| {
        poisfam(dir.path(), &[&args[..], &["--out", sub]].concat());
        let p = dir.path().join(sub);
        (
            std::fs::read(p.join("report.json")).unwrap(),
            std::fs::read(p.join("trajectory.csv")).unwrap(),
        )
    };
    assert_eq!(read("first"), read("second"));
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["run", "verify", "lv4"],
        &["run", "verify", "nlv", "--n", "4", "--a", "1,2"],
        &["run", "verify", "qp-lv3", "--c", "1,2"],
        &["run", "verify", "lv3", "--b", "1,2,3"],
        &["run", "integrate", "circle-maps"],
        &["run", "reduce", "lv3", "--x", "1,2"],
        &["run", "verify", "lv3", "--box", "0.7-1.3"],
        &["run", "verify"],
        &["run", "nonsense", "lv3"],
    ];
    for args in cases {
        let out = poisfam(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn check_failure_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    // the point is outside the default box, so the chart check fails
    let out = poisfam(dir.path(), &["run", "reduce", "lv3", "--x", "5,2,3"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["passed"], false);
    assert!(check(&r, "canonical_at_x")["error"].is_string());
}

#[test]
fn inline_scenario_with_overrides_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"
action = "verify"
points = 50
seed = 2

[system]
name = "exp-eta"
eta = "(exp x1)"
axes = [{ phi = "(add 1 (pow x 2))", a = 2.0 }, { phi = "x" }, { psi = "(pow x 3)" }]
domain = [[0.5, 1.0], [2.0, 3.0], [4.0, 5.0]]
pair = [1, 3]
hamiltonian = "(mul x1 x2 x3)"

[integrate]
t_end = 1e-5
"#;
    std::fs::write(dir.path().join("s.toml"), scenario).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_poisfam"))
        .current_dir(dir.path())
        .env("POISFAM_OUT_DIR", "from-env")
        .args(["run", "all", "--scenario", "s.toml", "--points", "80"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&dir.path().join("from-env"));
    assert_eq!(r["action"], "all");
    assert_eq!(r["points"], 80);
    assert_eq!(r["system"]["pair"], serde_json::json!([1, 3]));
    let csv = std::fs::read_to_string(dir.path().join("from-env/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,H,C2\n"));
}

#[test]
fn unknown_scenario_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.toml"),
        "action = \"verify\"\n[system]\ncatalog = \"lv3\"\nkk = 1\n",
    )
    .unwrap();
    let out = poisfam(dir.path(), &["run", "--scenario", "s.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn circle_maps_checks_all_three_casimir_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = poisfam(dir.path(), &["run", "verify", "circle-maps", "--points", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert!(f(&r["verification"]["casimir_gradient_max_normalized"]) <= 1e-6);
    assert!(r["system"].get("hamiltonian").is_none());
}

#[test]
fn custom_box_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let out = poisfam(
        dir.path(),
        &[
            "run",
            "verify",
            "lv3",
            "--box",
            "0.5:1.5,1.5:2.5,2.5:3.5",
            "--points",
            "100",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["system"]["domain"][2], serde_json::json!([2.5, 3.5]));
}
