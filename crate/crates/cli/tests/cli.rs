use std::path::Path;
use std::process::{Command, Output};

fn fblab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fblab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FBLAB_THREADS")
        .output()
        .expect("run fblab")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analysis_outputs_are_repeatable_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    let o = fblab(&["generate", "halfspace"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = dir.path().join("halfspace.fblab");
    let field = field.to_str().unwrap();

    let mut runs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = fblab(&["analyze", "weiss", field, "--seed", "3"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(["weiss.csv", "weiss.svg"].map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
    let csv = String::from_utf8(runs[0][0].clone()).unwrap();
    assert!(!csv.to_ascii_lowercase().contains("nan") && !csv.contains("inf"));
    assert!(csv.starts_with("t,W,W0,R_lower,dW_dt_quotient,eps_mono,status\n"));
}

#[test]
fn corrupted_field_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fblab");
    std::fs::write(&bad, "FBLAB1 2 1 3 3 -1 -1 1\n0\n0\n").unwrap();
    let o = fblab(&["analyze", "weiss", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.fblab"), "{}", stderr(&o));
}

#[test]
fn huge_kappa_is_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q99.cfg");
    std::fs::write(&cfg, "q = 0.99\n").unwrap();
    let o = fblab(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("resolution insufficient"), "{}", stderr(&o));
    assert!(!dir.path().join("verify.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.cfg");
    std::fs::write(&cfg, "nodez = 65\n").unwrap();
    let o = fblab(&["generate", "halfspace", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nodez"));

    let o = Command::new(env!("CARGO_BIN_EXE_fblab"))
        .args(["generate", "halfspace", "--out"])
        .arg(dir.path())
        .env("FBLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_precondition_exits_four_with_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.cfg");
    std::fs::write(&cfg, "boundary = zero\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = fblab(&["generate", "minimizer", "--config", c, "--threads", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = dir.path().join("minimizer.fblab");
    let o = fblab(&["analyze", "blowup", field.to_str().unwrap(), "--config", c], dir.path());
    assert_eq!(o.status.code(), Some(4));
    let csv = std::fs::read_to_string(dir.path().join("blowup.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains("error")));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("blowup.json")).unwrap()).unwrap();
    assert!(json["error"].is_string());
}
