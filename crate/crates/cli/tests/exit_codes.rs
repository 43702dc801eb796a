use std::path::Path;
use std::process::{Command, Output};

fn kpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpp")).args(args).output().unwrap()
}

#[test]
fn speed_on_the_default_field_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kpp(&["speed", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["speed.csv", "scan.csv", "speed.svg", "manifest.json"] {
        assert!(Path::new(out).join(f).exists(), "{f}");
    }
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "pass");
    assert_eq!(m["command"], "speed");
}

#[test]
fn missing_config_is_an_operational_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpp(&["audit", "--config", "/nonexistent/run.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(kpp(&["speed", "--bogus"]).status.code(), Some(64));
    assert_eq!(kpp(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_diagnostic_exits_with_two() {
    // A stability target no run can meet.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[field]\nkind = \"time-only\"\namplitudes = [0.3]\nfrequencies = [1.0]\n\n[stability]\nt_end = 5.0\ntarget = 0.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = kpp(&["stability", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists());
}
