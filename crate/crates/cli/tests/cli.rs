use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spgen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spgen")).args(args).current_dir(dir).output().expect("spawn spgen")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const IDENTITY_2: &str = r#"{"n": 1, "rows": [[1, 0], [0, 1]]}"#;

#[test]
fn check_identity_is_symplectic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "I.json", IDENTITY_2);
    let out = spgen(&["check", "I.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("symplectic: true"));
}

#[test]
fn check_rejects_scaling() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "S.json", r#"{"n": 1, "rows": [[2, 0], [0, 1]]}"#);
    let out = spgen(&["check", "S.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("symplectic: false"));
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spgen(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(spgen(&["check", "missing.json"], dir.path()).status.code(), Some(2));
    write(dir.path(), "bad.json", r#"{"n": 1, "rows": [[1, 0]]}"#);
    assert_eq!(spgen(&["check", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn witness_genfun_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = spgen(&["witness", "--n", "3", "--k", "2", "-o", "H.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let before = std::fs::read(dir.path().join("H.json")).unwrap();

    let out = spgen(&["--format", "json", "genfun", "verify", "H.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["graph_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["k"], 2);
    assert_eq!(report["seed"], 1);

    let out = spgen(&["genfun", "build", "H.json", "-o", "phi.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let phi: Value = serde_json::from_slice(&std::fs::read(dir.path().join("phi.json")).unwrap()).unwrap();
    assert_eq!(phi["Q"].as_array().unwrap().len(), 12);

    let out = spgen(&["meta", "check-phase", "phi.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let out = spgen(
        &["--format", "json", "genfun", "eval", "phi.json", "--z", "1+2i,-0.5i,3", "--theta", "0,1,0,0,0,0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let eval: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(eval["phi"].as_f64().unwrap().is_finite());

    assert_eq!(std::fs::read(dir.path().join("H.json")).unwrap(), before, "input was modified");
}

#[test]
fn explore_recovers_planted_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = spgen(
        &["--format", "json", "explore", "--n", "1", "--target-planted", "--seed", "3", "-o", "r.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let target = &report["targets"][0];
    assert!(target["best_residual"].as_f64().unwrap() < 1e-6);
    assert!(target["H_best"].is_array() && target["S"].is_array());
    assert!(report["aggregate"].is_object());
    let saved: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn metaplectic_commands() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "J.json", r#"{"n": 1, "rows": [[0, -1], [1, 0]]}"#);
    write(dir.path(), "T.json", r#"{"n": 1, "rows": [[1, 0.5], [0, 1]]}"#);
    write(dir.path(), "g.json", r#"{"n": 1, "M_re": [[0.3]], "M_im": [[1.5]], "c_re": 1, "c_im": 0, "h": 1}"#);

    let out = spgen(&["--format", "json", "meta", "quantize", "T.json", "--gaussian", "g.json", "--h", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["M_im"][0][0].as_f64().unwrap() > 0.0);

    let out = spgen(&["meta", "compose", "J.json", "T.json", "--gaussian", "g.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn suite_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = spgen(&["suite", "--quick", "--only", "2,4,6", "--seed", "5", "-o", name], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["tolerances"]["restriction"], 1e-8);
}

#[test]
fn tightened_tolerance_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = spgen(&["suite", "--quick", "--only", "2", "--tol", "restriction=1e-30"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));

    let out = spgen(&["suite", "--quick", "--only", "2", "--tol", "nonsense=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
