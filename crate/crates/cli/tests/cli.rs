//! Black-box tests of the `bitrade` binary: exit codes, report shapes,
//! and input validation messages.

use std::path::{Path, PathBuf};
use std::process::Output;

use tempfile::TempDir;

fn bitrade(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_bitrade"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn discrete_instance(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "inst.json",
        r#"{"k":3,"class":"increasing_submodular",
            "buyer":{"kind":"discrete","support":[{"values":[0,5,8,9],"prob":1.0}]},
            "seller":{"kind":"discrete","support":[{"values":[0,3,5,6],"prob":1.0}]}}"#,
    )
}

fn continuous_instance(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "cont.json",
        r#"{"k":5,"class":"increasing_submodular",
            "buyer":{"kind":"discrete","support":[{"values":[0,9,16,21,24,25],"prob":1.0}]},
            "seller":{"kind":"sorted_iid","base":{"uniform":[0,10]},"k":5,"role":"seller"}}"#,
    )
}

fn mechanism(dir: &TempDir) -> PathBuf {
    write(dir, "mech.json", r#"{"p":2.0,"S":[1,2,3],"tie":"favor_highest","k":3}"#)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluate_emits_one_csv_row_with_fixed_header() {
    let dir = TempDir::new().unwrap();
    let inst = discrete_instance(&dir);
    let mech = mechanism(&dir);
    let out = bitrade(&["evaluate", "--mechanism", arg(&mech), "--instance", arg(&inst)]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "instance_id,mechanism,opt,sw,ratio,method,trials,stderr");
    assert_eq!(lines[1], "inst,mech,11,11,1,exact,,");
}

#[test]
fn verify_clean_mechanism_exits_zero_with_empty_report() {
    let dir = TempDir::new().unwrap();
    let inst = discrete_instance(&dir);
    let mech = mechanism(&dir);
    let out = bitrade(&["verify", "--instance", arg(&inst), "--mechanism", arg(&mech)]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
}

#[test]
fn verify_multi_quantity_schedule_on_increasing_class_fails() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "inc.json",
        r#"{"k":3,"class":"increasing",
            "buyer":{"kind":"discrete","support":[{"values":[0,5,8,9],"prob":1.0}]},
            "seller":{"kind":"discrete","support":[{"values":[0,3,5,6],"prob":1.0}]}}"#,
    );
    let mech = mechanism(&dir);
    let out = bitrade(&["verify", "--instance", arg(&inst), "--mechanism", arg(&mech)]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "exactly one violation line");
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(matches!(
        v["kind"].as_str().unwrap(),
        "IR_buyer" | "IR_seller" | "DSIC_buyer" | "DSIC_seller"
    ));
    assert!(v["delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn approx_det2_monte_carlo_meets_documented_bound() {
    let dir = TempDir::new().unwrap();
    let inst = continuous_instance(&dir);
    let out = bitrade(&[
        "approx", "--mechanism", "det2", "--instance", arg(&inst),
        "--mode", "mc", "--trials", "100000", "--seed", "7",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let ratio: f64 = row[4].parse().unwrap();
    assert!(ratio <= 2.02, "ratio {ratio}");
    assert_eq!(row[5], "monte_carlo");
    assert_eq!(row[6], "100000");
}

#[test]
fn sweep_produces_one_row_per_price_and_unimodal_welfare() {
    let dir = TempDir::new().unwrap();
    let inst = discrete_instance(&dir);
    let out = bitrade(&[
        "sweep", "--prices", "0,1,2,3,4,5,6,7,8,9,10", "--instance", arg(&inst),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let sw: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(sw.len(), 11);
    // single peak: never increases again after the first decrease
    let peak = sw
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert!(sw[..=peak].windows(2).all(|p| p[0] <= p[1]));
    assert!(sw[peak..].windows(2).all(|p| p[0] >= p[1]));
}

#[test]
fn missing_seed_in_mc_mode_is_an_error() {
    let dir = TempDir::new().unwrap();
    let inst = continuous_instance(&dir);
    let out = bitrade(&[
        "approx", "--mechanism", "det2", "--instance", arg(&inst), "--mode", "mc",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn exact_mode_on_continuous_buyer_is_rejected_not_degraded() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "contbuyer.json",
        r#"{"k":3,"class":"increasing_submodular",
            "buyer":{"kind":"sorted_iid","base":{"uniform":[0,10]},"k":3,"role":"buyer"},
            "seller":{"kind":"discrete","support":[{"values":[0,3,5,6],"prob":1.0}]}}"#,
    );
    let mech = mechanism(&dir);
    let out = bitrade(&["evaluate", "--mechanism", arg(&mech), "--instance", arg(&inst)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported mode"));
}

#[test]
fn class_mismatch_error_names_the_offending_entry() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "bad.json",
        r#"{"k":2,"class":"increasing",
            "buyer":{"kind":"discrete","support":[{"values":[0,2,2],"prob":1.0}]},
            "seller":{"kind":"discrete","support":[{"values":[0,1,2],"prob":1.0}]}}"#,
    );
    let mech = write(&dir, "m.json", r#"{"p":1.0,"S":[1],"k":2}"#);
    let out = bitrade(&["verify", "--instance", arg(&inst), "--mechanism", arg(&mech)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("buyer.support[0]"), "stderr: {err}");
    assert!(err.contains("index 2"), "stderr: {err}");
}

#[test]
fn probabilities_not_summing_to_one_are_rejected() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "norm.json",
        r#"{"k":2,"class":"increasing",
            "buyer":{"kind":"discrete","support":[{"values":[0,1,2],"prob":0.9}]},
            "seller":{"kind":"discrete","support":[{"values":[0,1,2],"prob":1.0}]}}"#,
    );
    let mech = write(&dir, "m.json", r#"{"p":1.0,"S":[1],"k":2}"#);
    let out = bitrade(&["verify", "--instance", arg(&inst), "--mechanism", arg(&mech)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("sum"), "stderr: {err}");
}

#[test]
fn mismatched_k_between_instance_and_mechanism_is_rejected() {
    let dir = TempDir::new().unwrap();
    let inst = discrete_instance(&dir);
    let mech = write(&dir, "k5.json", r#"{"p":1.0,"S":[1],"k":5}"#);
    let out = bitrade(&["evaluate", "--mechanism", arg(&mech), "--instance", arg(&inst)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k = 5"));
}

#[test]
fn out_file_matches_stdout_bytes() {
    let dir = TempDir::new().unwrap();
    let inst = discrete_instance(&dir);
    let mech = mechanism(&dir);
    let path = dir.path().join("report.csv");
    let out = bitrade(&[
        "evaluate", "--mechanism", arg(&mech), "--instance", arg(&inst),
        "--out", arg(&path),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), out.stdout);
}
