use std::fs;
use std::path::Path;
use std::process::Command;

use lyapforge::field::ScalarField;
use lyapforge::stability::StabilityVerdict;
use lyapforge::trajectory::Trajectory;

fn lyapforge(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_lyapforge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("LYAPFORGE_THREADS", "1")
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn data(name: &str) -> String {
    lyapforge::cli::bundled_data_dir().join(name).display().to_string()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn pipeline_on_the_reference_network() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lyapforge(&["pipeline"], dir.path()), 0);
    let m = manifest(dir.path());
    assert_eq!(m["passed"], true);
    assert_eq!(m["stage"], "verify-assumption-a");
    let cert = fs::read_to_string(dir.path().join("certificate.json")).unwrap();
    match serde_json::from_str::<StabilityVerdict>(&cert).unwrap() {
        StabilityVerdict::Certified(c) => assert!((c.tau - 1.0).abs() < 1e-2),
        other => panic!("{other:?}"),
    }
    for name in ["Vs.csv", "Ws.csv", "Ve.csv", "Vr.csv", "glue_report.txt", "neighbor.csv", "decrease_report.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
        assert!(m["artifacts"].as_array().unwrap().iter().any(|a| a == name));
    }
}

#[test]
fn reversed_network_is_unstable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lyapforge(&["pipeline", "--config", &data("single_station_reversed.json")], dir.path()), 1);
    let cert = fs::read_to_string(dir.path().join("certificate.json")).unwrap();
    assert!(matches!(
        serde_json::from_str::<StabilityVerdict>(&cert).unwrap(),
        StabilityVerdict::Unstable { .. }
    ));
    assert_eq!(manifest(dir.path())["passed"], false);
}

#[test]
fn usc_probe_records_the_witness() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lyapforge(&["usc-probe"], dir.path()), 0);
    let w: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("usc_probe.json")).unwrap()).unwrap();
    assert_eq!(w["result"], "witness");
    assert_eq!(w["state"][0], 0.0);
    assert_eq!(w["velocity"][0], -1.0);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lyapforge(&["validate", "--config", "/nonexistent/net.json"], dir.path()), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"stations":1,"classes":1,"constituency":[[1]],"alpha":[1],"mu":[-2],"routing":[[0]]}"#)
        .unwrap();
    assert_eq!(lyapforge(&["validate", "--config", bad.to_str().unwrap()], dir.path()), 2);
    assert_eq!(lyapforge(&["smooth", "--grid-lo", "1"], dir.path()), 2);
}

#[test]
fn runs_are_byte_identical_and_artifacts_round_trip() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--samples", "3", "--seed", "11"];
    assert_eq!(lyapforge(&args, a.path()), 0);
    assert_eq!(lyapforge(&args, b.path()), 0);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
    let text = fs::read_to_string(a.path().join("trajectory_0.csv")).unwrap();
    let tr = Trajectory::from_csv(&text, 3.0).unwrap();
    assert_eq!(tr.to_csv(), text);

    let c = tempfile::tempdir().unwrap();
    assert_eq!(lyapforge(&["lyapunov", "--grid-step", "0.05"], c.path()), 0);
    let csv = fs::read_to_string(c.path().join("Ve.csv")).unwrap();
    let meta = fs::read_to_string(c.path().join("Ve.json")).unwrap();
    let f = ScalarField::from_dump(&csv, &meta).unwrap();
    assert_eq!(f.to_csv(), csv);
}

#[test]
fn filippov_bound_flag() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lyapforge(&["verify-assumption-a", "--bound", "filippov"], dir.path()), 0);
    let s = fs::read_to_string(dir.path().join("neighbor.json")).unwrap();
    assert!(s.contains("exp(3 t)-1"));
}
