use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn maps() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

fn mdyn(args: &[&str], map: &str, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_mdyn"))
        .args(&args[..1])
        .arg(maps().join(map))
        .args(&args[1..])
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn analyze_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    assert_eq!(
        mdyn(&["analyze", "--horizon", "120", "--gap-T", "5,10"], "tent.json", &out),
        0
    );
    for f in [
        "manifest.json",
        "kneading.json",
        "chain_0.csv",
        "shadowing_times.json",
        "ce.json",
        "sr.json",
        "tsr.json",
        "gaps.json",
        "lemma_fits.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["header"]["command"], "analyze");

    let again = tmp.path().join("b");
    assert_eq!(
        mdyn(&["analyze", "--horizon", "120", "--gap-T", "5,10"], "tent.json", &again),
        0
    );
    let h = json(&again.join("manifest.json"));
    assert_eq!(m["header"]["config_hash"], h["header"]["config_hash"]);

    let other = tmp.path().join("c");
    assert_eq!(
        mdyn(&["analyze", "--horizon", "121", "--gap-T", "5,10"], "tent.json", &other),
        0
    );
    let o = json(&other.join("manifest.json"));
    assert_ne!(m["header"]["config_hash"], o["header"]["config_hash"]);
}

#[test]
fn invalid_input_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        mdyn(&["analyze", "--horizon", "0"], "ulam.json", &tmp.path().join("a")),
        1
    );
    assert_eq!(mdyn(&["analyze"], "missing.json", &tmp.path().join("b")), 1);
}

#[test]
fn conjugacy_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let args = ["conjugacy", "--horizon", "100", "--kneading-length", "300"];
    assert_eq!(mdyn(&args, "tent_ulam.json", &ok), 0);
    let inv = json(&ok.join("invariance.json"));
    assert_eq!(inv["report"]["invariant"], true);
    assert_eq!(inv["report"]["tsr_delta"], 0.0);
    assert!(ok.join("residual.json").exists());

    let bad = tmp.path().join("bad");
    assert_eq!(mdyn(&args, "mismatched.json", &bad), 2);
    let m = json(&bad.join("manifest.json"));
    assert_eq!(m["status"], "check_failed");
}

#[test]
fn oracle_and_negative_control() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "oracle",
        "--depth",
        "8",
        "--grid",
        "20000",
        "--horizon",
        "300",
        "--metric-depth",
        "100",
    ];
    assert_eq!(mdyn(&args, "ulam.json", &tmp.path().join("a")), 0);
    let mut bad = args.to_vec();
    bad.extend(["--perturb", "0.01"]);
    assert_eq!(mdyn(&bad, "ulam.json", &tmp.path().join("b")), 2);
}

#[test]
fn calibrate_reports_delta0() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("k");
    assert_eq!(mdyn(&["calibrate"], "fold3.json", &out), 0);
    let c = json(&out.join("calibration.json"));
    assert_eq!(c["report"]["delta0_exact"], "1/6");
    assert!(c["report"]["n0"].as_u64().unwrap() >= 1);
}
