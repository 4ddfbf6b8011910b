use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gsw");

fn gsw(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("GSW_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn identity4(dir: &Path) {
    let out = gsw(dir, &["gen", "--kind", "identity", "--d", "4", "--n", "4", "--out", "id4.txt"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn gen_writes_identity_file() {
    let dir = tempfile::tempdir().unwrap();
    identity4(dir.path());
    let text = std::fs::read_to_string(dir.path().join("id4.txt")).unwrap();
    assert_eq!(text, "4 4\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
}

#[test]
fn oracle_subgaussian_on_identity() {
    let dir = tempfile::tempdir().unwrap();
    identity4(dir.path());
    let out = gsw(dir.path(), &["oracle", "--instance", "id4.txt", "--check", "subgaussian", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let max = v["subgaussian"]["max_moment"].as_f64().unwrap();
    assert!(max <= 1.0 + 1e-10);
    // Each coordinate moves once, by ±1 with Z = 1: E exp(±1 − 1/2) = cosh(1)·e^{-1/2}.
    assert!((max - 1f64.cosh() * (-0.5f64).exp()).abs() < 1e-12);
    assert_eq!(v["subgaussian"]["holds"], Value::Bool(true));
}

#[test]
fn oracle_all_checks_hold() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsw(dir.path(), &["gen", "--kind", "random_unit_sphere", "--d", "3", "--n", "5", "--seed", "4", "--out", "m.txt"]);
    assert_eq!(out.status.code(), Some(0));
    let out = gsw(dir.path(), &["oracle", "--instance", "m.txt", "--v", "random", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains("\"holds\": false"), "{text}");
    for key in ["martingale", "subgaussian", "increments", "bruteforce"] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn mc_identity_has_deterministic_hat_t() {
    let dir = tempfile::tempdir().unwrap();
    identity4(dir.path());
    let out = gsw(dir.path(), &["mc", "--instance", "id4.txt", "--runs", "1000", "--seed", "7", "--out", "rep.json"]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["mean_hatT"].as_f64(), Some(4.0));
    assert_eq!(rep["runs"].as_u64(), Some(1000));
    assert_eq!(rep["master_seed"].as_u64(), Some(7));
    assert_eq!(rep["seed_source"], "flag");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    gsw(p, &["gen", "--kind", "random_in_ball", "--d", "3", "--n", "7", "--seed", "9", "--out", "b.txt"]);
    for (fmt, a, b) in [("json", "a.json", "b.json"), ("csv", "a.csv", "b.csv")] {
        for out in [a, b] {
            let o = gsw(p, &["mc", "--instance", "b.txt", "--runs", "300", "--seed", "5", "--format", fmt, "--out", out]);
            assert_eq!(o.status.code(), Some(0));
        }
        assert_eq!(std::fs::read(p.join(a)).unwrap(), std::fs::read(p.join(b)).unwrap());
    }
    let one = gsw(p, &["--threads", "1", "mc", "--instance", "b.txt", "--runs", "300", "--seed", "5", "--out", "t1.json"]);
    let four = gsw(p, &["--threads", "4", "mc", "--instance", "b.txt", "--runs", "300", "--seed", "5", "--out", "t4.json"]);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(std::fs::read(p.join("t1.json")).unwrap(), std::fs::read(p.join("a.json")).unwrap());
    assert_eq!(std::fs::read(p.join("t4.json")).unwrap(), std::fs::read(p.join("a.json")).unwrap());
}

#[test]
fn seed_variable_is_used_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    identity4(dir.path());
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(BIN);
        cmd.current_dir(dir.path()).env_remove("GSW_SEED");
        if let Some(s) = env {
            cmd.env("GSW_SEED", s);
        }
        cmd.args(["run", "--instance", "id4.txt"]).args(extra).output().unwrap()
    };
    let v = json(&run(Some("42"), &[]));
    assert_eq!(v["seed"].as_u64(), Some(42));
    assert_eq!(v["seed_source"], "env");
    let v = json(&run(Some("42"), &["--seed", "3"]));
    assert_eq!(v["seed"].as_u64(), Some(3));
    assert_eq!(v["seed_source"], "flag");
    let v = json(&run(None, &[]));
    assert_eq!(v["seed_source"], "default");
    assert_eq!(run(Some("not-a-number"), &[]).status.code(), Some(2));
}

#[test]
fn trace_dump_round_trips_through_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    gsw(p, &["gen", "--kind", "duplicated_column", "--d", "2", "--n", "3", "--out", "dup.txt"]);
    let o = gsw(p, &["run", "--instance", "dup.txt", "--seed", "1", "--dump-trace", "t.json"]);
    assert_eq!(o.status.code(), Some(0));
    let steps: Value = serde_json::from_str(&std::fs::read_to_string(p.join("t.json")).unwrap()).unwrap();
    let steps = steps.as_array().unwrap();
    assert!(!steps.is_empty());
    for key in ["t", "pivot", "u", "delta_plus", "delta_minus", "chosen_delta", "choice_probability", "frozen"] {
        assert!(steps[0].get(key).is_some(), "missing {key}");
    }
    let from_dump = json(&gsw(p, &["trace", "--instance", "dup.txt", "--trace", "t.json"]));
    let from_seed = json(&gsw(p, &["trace", "--instance", "dup.txt", "--seed", "1"]));
    assert_eq!(from_dump["sigma"], from_seed["sigma"]);
    assert_eq!(from_dump["hatT"].as_u64(), Some(1));
}

#[test]
fn check_ineq_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsw(dir.path(), &["check-ineq", "--which", "hoeffding", "--grid-step", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["holds"], Value::Bool(true));
    let o = gsw(dir.path(), &["check-ineq", "--which", "cosh", "--grid-step", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["ratio"]["holds"], Value::Bool(true));
    assert_eq!(v["strict"]["holds"], Value::Bool(true));
    let o = gsw(dir.path(), &["check-ineq", "--which", "comparison", "--trials", "10", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = gsw(dir.path(), &["check-ineq", "--which", "lemma1", "--grid-step", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"holds\": false"), "the unnormalized form fails on the grid: {text}");
}

#[test]
fn smoothed_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    gsw(p, &["gen", "--kind", "random_unit_sphere", "--d", "2", "--n", "4", "--seed", "1", "--out", "s.txt"]);
    let o = gsw(p, &["smoothed", "--instance", "s.txt", "--epsilon", "0.5", "--r-trials", "20", "--seed", "8", "--out", "sm.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sm: Value = serde_json::from_str(&std::fs::read_to_string(p.join("sm.json")).unwrap()).unwrap();
    assert!(sm.to_string().contains("conditions"));

    gsw(p, &["mc", "--instance", "s.txt", "--runs", "50", "--seed", "1", "--out", "r.csv"]);
    let o = gsw(p, &["report", "--in", "r.csv", "--summary"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("runs 50\n"), "{text}");
}

#[test]
fn usage_and_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    identity4(p);
    assert_eq!(gsw(p, &["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(gsw(p, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(gsw(p, &["mc", "--instance", "id4.txt", "--runs", "ten"]).status.code(), Some(2));
    assert_eq!(gsw(p, &["oracle", "--instance", "id4.txt", "--check", "nope"]).status.code(), Some(2));

    let missing = gsw(p, &["run", "--instance", "missing.txt"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());
    assert_eq!(gsw(p, &["gen", "--kind", "identity", "--d", "4", "--n", "5", "--out", "x.txt"]).status.code(), Some(1));
    std::fs::write(p.join("bad.txt"), "2 2\n1 0\n0 2\n").unwrap();
    assert_eq!(gsw(p, &["run", "--instance", "bad.txt"]).status.code(), Some(1));
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 8] = [
        ("gen", &["--kind", "--d", "--n", "--seed", "--out"]),
        ("run", &["--instance", "--seed", "--dump-trace"]),
        ("trace", &["--instance"]),
        ("mc", &["--instance", "--runs", "--seed", "--out", "--format"]),
        ("oracle", &["--instance", "--check", "--lambda", "--v"]),
        ("check-ineq", &["--which", "--grid-step"]),
        ("smoothed", &["--instance", "--sigma", "--kappa", "--cutoff-c", "--epsilon", "--epsilon-auto", "--r-trials", "--seed", "--out"]),
        ("report", &["--in", "--summary"]),
    ];
    for (sub, flags) in cases {
        let o = gsw(dir.path(), &[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let text = String::from_utf8(o.stdout).unwrap();
        for f in flags {
            assert!(text.contains(f), "{sub} --help lacks {f}");
        }
    }
}
