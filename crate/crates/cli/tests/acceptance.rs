//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1 to 11 are read from a `fblab verify` report. Criterion 12 runs
//! the binary a second time with the same seed and compares the reports byte
//! for byte.

use std::path::Path;
use std::process::{Command, ExitCode, Stdio};

use serde_json::Value;

const SEED: &str = "7";

fn verify(out: &Path) -> Result<(Vec<u8>, bool), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_fblab"))
        .args(["verify", "--seed", SEED, "--out"])
        .arg(out)
        .stdout(Stdio::null())
        .status()
        .map_err(|e| format!("running fblab: {e}"))?;
    let bytes = std::fs::read(out.join("verify.json")).map_err(|e| format!("reading report: {e}"))?;
    Ok((bytes, status.success()))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let first = verify(&dir.path().join("a"));
    let second = verify(&dir.path().join("b"));
    let mut all = true;
    let mut line = |id: usize, name: &str, ok: bool, detail: String| {
        all &= ok;
        println!("{} {id:>2} {name}{}", if ok { "PASS" } else { "FAIL" }, if detail.is_empty() { detail } else { format!(": {detail}") });
    };

    match &first {
        Ok((bytes, _)) => {
            let report: Value = serde_json::from_slice(bytes).expect("verify.json is JSON");
            let criteria = report["criteria"].as_array().cloned().unwrap_or_default();
            for id in 1..=fblab_cli::checks::CRITERIA.len() {
                let name = fblab_cli::checks::CRITERIA[id - 1];
                match criteria.iter().find(|c| c["id"] == id) {
                    Some(c) => {
                        let failures: Vec<String> =
                            c["failures"].as_array().into_iter().flatten().filter_map(|f| f.as_str().map(String::from)).collect();
                        line(id, name, c["passed"] == true, failures.join("; "));
                    }
                    None => line(id, name, false, "missing from report".into()),
                }
            }
            for inv in report["invariants"].as_array().into_iter().flatten() {
                if inv["passed"] != true {
                    println!("     invariant {} failed: {}", inv["name"], inv["failures"]);
                }
            }
        }
        Err(e) => {
            for (i, name) in fblab_cli::checks::CRITERIA.iter().enumerate() {
                line(i + 1, name, false, e.clone());
            }
        }
    }

    let deterministic = match (&first, &second) {
        (Ok((a, _)), Ok((b, _))) if a == b => (true, String::new()),
        (Ok(_), Ok(_)) => (false, "reports differ".into()),
        (Err(e), _) | (_, Err(e)) => (false, e.clone()),
    };
    line(12, "determinism", deterministic.0, deterministic.1);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
