use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn infraplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infraplan")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ten() -> [String; 4] {
    [
        "--network".into(),
        data("sewersheds10.json").display().to_string(),
        "--budget".into(),
        data("budget.json").display().to_string(),
    ]
}

fn with<'a>(head: &[&'a str], inputs: &'a [String], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(inputs.iter().map(String::as_str)).chain(tail.iter().copied()).collect()
}

#[test]
fn enumerate_actions_on_ten_sewersheds() {
    let inputs = ten();
    let o = infraplan(&with(&["enumerate-actions"], &inputs, &[]));
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("year 1: 20"));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn count_plans_in_both_arithmetics() {
    let inputs = ten();
    let whole = infraplan(&with(&["count-plans"], &inputs, &["--cost-arithmetic", "whole-units"]));
    assert_eq!(stdout(&whole).trim(), "2249947");
    let exact = infraplan(&with(&["count-plans"], &inputs, &["--jobs", "2"]));
    assert_eq!(stdout(&exact).trim(), "2249437");
}

#[test]
fn evaluate_reference_plan() {
    let inputs = ten();
    let plan = data("table2_plan.csv").display().to_string();
    let o = infraplan(&with(&["evaluate"], &inputs, &["--plan", &plan]));
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("year 2: cost 96671.88 ok"), "{out}");
    assert!(out.contains("total cost 498924.66"));
    assert!(out.contains("feasible yes"));
}

fn train(dir: &Path, method: &str, seed: &str, inputs: &[String]) -> Output {
    let out = dir.display().to_string();
    let args = with(
        &["train", method],
        inputs,
        &["--seed", seed, "--episodes", "12", "--hidden", "16", "--batch", "8", "--eval-every", "3", "--out-dir", &out],
    );
    infraplan(&args)
}

#[test]
fn seeded_training_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = ten();
    for method in ["hdrl", "dql"] {
        let a = tmp.path().join(format!("{method}-a"));
        let b = tmp.path().join(format!("{method}-b"));
        assert!(train(&a, method, "7", &inputs).status.success());
        assert!(train(&b, method, "7", &inputs).status.success());
        let ma = fs::read(a.join("metrics.csv")).unwrap();
        assert_eq!(ma, fs::read(b.join("metrics.csv")).unwrap());
        assert_eq!(String::from_utf8(ma).unwrap().lines().count(), 13);
        for f in ["plan.csv", "trace.csv", "checkpoint.json"] {
            assert!(a.join(f).exists(), "{method} {f}");
        }
        let plan = a.join("plan.csv").display().to_string();
        let e = infraplan(&with(&["evaluate"], &inputs, &["--plan", &plan]));
        assert!(stdout(&e).contains("feasible yes"), "{method}: {}", stdout(&e));
    }
}

#[test]
fn study_writes_a_summary_row_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = ten();
    let out = tmp.path().display().to_string();
    let args = with(
        &["study", "--method", "dql"],
        &inputs,
        &["--seeds", "3", "--jobs", "2", "--episodes", "4", "--hidden", "8", "--batch", "4", "--out-dir", &out],
    );
    let o = infraplan(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows[0], "seed,objective,average_condition,total_cost,best_episode");
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("2,"));
    assert!(tmp.path().join("seed-1/metrics.csv").exists());
}

#[test]
fn synthetic_instance_round_trip_through_the_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().display().to_string();
    assert!(infraplan(&["synth", "--seed", "3", "--n", "5", "--horizon", "3", "--out-dir", &dir]).status.success());
    let inputs = [
        "--network".to_string(),
        tmp.path().join("network.json").display().to_string(),
        "--budget".to_string(),
        tmp.path().join("budget.json").display().to_string(),
    ];
    assert!(infraplan(&with(&["validate"], &[], &[&inputs[1], &inputs[3]])).status.success());
    let plan = tmp.path().join("opt.csv").display().to_string();
    let o = infraplan(&with(&["solve-exact"], &inputs, &["--out", &plan]));
    assert!(o.status.success());
    let objective = stdout(&o).lines().next().unwrap().to_string();
    let e = infraplan(&with(&["evaluate"], &inputs, &["--plan", &plan]));
    assert_eq!(stdout(&e).lines().next().unwrap(), objective);
    assert!(stdout(&e).contains("feasible yes"));
}

#[test]
fn exit_codes() {
    assert_eq!(infraplan(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(infraplan(&["count-plans", "--network"]).status.code(), Some(2));
    let missing = infraplan(&["validate", "/nonexistent/net.json", "/nonexistent/budget.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("net.json"));
    let help = infraplan(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("schema version 1"));
}

#[test]
fn malformed_dataset_is_a_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("sewersheds10.json")).unwrap().replacen("0.82", "0.92", 1);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, text).unwrap();
    let o = infraplan(&["validate", &bad.display().to_string(), &data("budget.json").display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("deterioration row"), "{}", String::from_utf8_lossy(&o.stderr));
}
