use std::path::Path;
use std::process::Command;

fn arealaw(args: &[&str], env: &[(&str, &Path)]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arealaw"));
    cmd.args(args).env_remove("AREALAW_OUTPUT_DIR").env_remove("AREALAW_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn measure_reports_one_bit_for_the_classical_chain() {
    let (code, out, _) = arealaw(&["measure", "--model", "classical_ising", "--n", "6", "--cut", "3"], &[]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["I_omega"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["ground"]["r"], 2);
}

#[test]
fn config_errors_exit_with_four_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[model]\nkind = \"projector_chain\"\nn = 6\nsites = 3\n").unwrap();
    let (code, _, err) = arealaw(&["sweep", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(code, 4);
    assert!(err.contains("sites") && err.contains("line 4"), "{err}");
    let (code, _, _) = arealaw(&["measure", "--model", "classical_ising"], &[]);
    assert_eq!(code, 4);
    let (code, _, _) = arealaw(&["frobnicate"], &[]);
    assert_eq!(code, 4);
}

#[test]
fn sweep_reports_fibonacci_degeneracies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.toml");
    std::fs::write(&path, "[model]\nkind = \"projector_chain\"\nn = [6, 8, 10]\n[bootstrap]\nseed = 1\n").unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = arealaw(&["sweep", "--config", path.to_str().unwrap()], &[("AREALAW_OUTPUT_DIR", &out)]);
    assert_eq!(code, 0, "{err}");
    let mut rd = csv::Reader::from_path(out.join("table.csv")).unwrap();
    let r: Vec<usize> = rd.records().map(|rec| rec.unwrap()[4].parse().unwrap()).collect();
    assert_eq!(r, vec![21, 55, 144]);
    assert!(out.join("plotdata.csv").exists() && out.join("results.json").exists());
}

#[test]
fn bootstrap_witnesses_recheck_offline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) =
        arealaw(&["bootstrap", "--model", "projector_chain", "--n", "6", "--cut", "3", "--out", out], &[]);
    assert_eq!(code, 0);
    let (code, stdout, _) = arealaw(&["selftest", "--run-dir", out], &[]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("0 failed"));
    // a tampered factor no longer matches its hash
    let json = dir.path().join("witnesses.json");
    let text = std::fs::read_to_string(&json).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v[0]["factor"] = serde_json::json!(v[0]["factor"].as_f64().unwrap() * 0.5);
    std::fs::write(&json, v.to_string()).unwrap();
    let (code, _, _) = arealaw(&["selftest", "--run-dir", out], &[]);
    assert_eq!(code, 2);
}

#[test]
fn selftest_suite_passes() {
    let (code, out, _) = arealaw(&["selftest"], &[]);
    assert_eq!(code, 0, "{out}");
    assert!(!out.contains("FAIL"));
}
