//! Smoke tests of the installed binary: exit codes, stdout path listing and
//! stderr diagnostics.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_i2mufs"))
}

#[test]
fn synth_then_run_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    let synth = bin()
        .args(["synth", "--n", "60", "--k", "3", "--seed", "1"])
        .args(["--dims", "8", "--dims", "6", "--noise", "4"])
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();
    assert!(synth.status.success(), "synth failed: {synth:?}");
    let manifest = data.join("synth_manifest.json");
    assert!(manifest.exists());
    let stdout = String::from_utf8(synth.stdout).unwrap();
    assert!(stdout.contains("synth_manifest.json"));

    let out = dir.path().join("out");
    let run = bin()
        .arg("run")
        .arg("--manifest")
        .arg(&manifest)
        .args(["--ratio-incomplete", "0.2", "--chunks", "2"])
        .args(["--ratio-features", "0.5", "--seeds", "1..2"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "run failed: {run:?}");
    assert!(out.join("report_seed1.json").exists());
    assert!(out.join("report_seed2.json").exists());
    assert!(out.join("report_mean.json").exists());
}

#[test]
fn invalid_configuration_exits_nonzero_with_stderr_diagnostic() {
    let missing = Path::new("/nonexistent/manifest.json");
    let run = bin()
        .arg("run")
        .arg("--manifest")
        .arg(missing)
        .output()
        .unwrap();
    assert!(!run.status.success());
    let stderr = String::from_utf8(run.stderr).unwrap();
    assert!(stderr.contains("error"), "stderr was: {stderr}");

    let bad_lambda = bin()
        .args(["run", "--manifest", "x.json", "--lambda", "0.5"])
        .output()
        .unwrap();
    assert!(!bad_lambda.status.success());
}

#[test]
fn thread_cap_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    bin()
        .args(["synth", "--n", "40", "--k", "2", "--seed", "3"])
        .args(["--dims", "5", "--dims", "5", "--noise", "2"])
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();

    let out = dir.path().join("out");
    let run = bin()
        .env("IMUFS_THREADS", "1")
        .arg("run")
        .arg("--manifest")
        .arg(data.join("synth_manifest.json"))
        .args(["--chunks", "1", "--seeds", "1..4"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "run failed: {run:?}");
    assert!(out.join("report_seed4.json").exists());
}
