use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dpplocal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpplocal")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_meta(text: &str) -> Value {
    let first = text.lines().next().unwrap();
    serde_json::from_str(first.strip_prefix("# ").expect("meta line")).unwrap()
}

#[test]
fn oracle_lists_sixteen_spanning_trees() {
    let text = stdout(&dpplocal(&["--seed", "3", "oracle", "--family", "ust", "--params", "n=4"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 17);
    let meta: Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(meta["meta"]["seed"], 3);
    for l in &lines[1..] {
        let v: Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["members"].as_array().unwrap().len(), 3);
        assert!((v["probability"].as_f64().unwrap() - 0.0625).abs() < 1e-9);
    }
}

#[test]
fn tk_dist_is_normalized() {
    let text = stdout(&dpplocal(&["tk-dist", "--k", "1", "--radius", "2", "--max-vertices", "41"]));
    assert_eq!(csv_meta(&text)["config"]["command"], "tk-dist");
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next(), Some("code,probability"));
    let mut total = 0.0;
    let mut residual = None;
    for l in lines {
        let (code, p) = l.split_once(',').unwrap();
        let p: f64 = p.parse().unwrap();
        if code == "residual" {
            residual = Some(p);
        } else {
            total += p;
        }
    }
    assert!(total >= 1.0 - 1e-6);
    assert!(residual.unwrap() < 1e-6);
}

#[test]
fn same_seed_gives_identical_output() {
    let args =
        ["--seed", "9", "sample", "--family", "kalai", "--params", "n=7,k=2", "--count", "5"];
    let a = stdout(&dpplocal(&args));
    let b = stdout(&dpplocal(&args));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 6);
    let mut other = args;
    other[1] = "10";
    assert_ne!(stdout(&dpplocal(&other)), a);
    let threaded = stdout(&dpplocal(&[&["--threads", "2"][..], &args[..]].concat()));
    assert_eq!(threaded, a);
}

#[test]
fn errors_and_usage_have_distinct_exit_codes() {
    let bad = dpplocal(&["generate", "--family", "grassmannian", "--params", "q=6,n=5,l=1"]);
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.starts_with("error: incidence:"), "{err}");
    assert!(err.contains("prime power"));
    assert_eq!(dpplocal(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(dpplocal(&["tk-dist", "--k", "1"]).status.code(), Some(2));
}

#[test]
fn generate_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let p = path.to_str().unwrap();
    stdout(&dpplocal(&["--out", p, "generate", "--family", "kalai", "--params", "n=6,k=2"]));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(doc["meta"]["tool_version"].is_string());
    let report: Value =
        serde_json::from_str(&stdout(&dpplocal(&["validate", "--graph", p]))).unwrap();
    assert_eq!(report["all_ok"], true);
    assert_eq!(report["report"]["c4_free"], true);
}

#[test]
fn experiment_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let dump = dir.path().join("dump");
    std::fs::create_dir(&dump).unwrap();
    let text = stdout(&dpplocal(&[
        "--seed",
        "5",
        "experiment",
        "--family",
        "ust",
        "--sizes",
        "20,40",
        "--k",
        "1",
        "--radius",
        "2",
        "--samples",
        "50",
        "--roots",
        "0",
        "--table",
        table.to_str().unwrap(),
        "--dump-dir",
        dump.to_str().unwrap(),
    ]));
    let report: Value = serde_json::from_str(&text).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for (row, n) in rows.iter().zip([20u64, 40]) {
        assert_eq!(row["size"], n);
        assert_eq!(row["root_samples"], 50 * n);
        let tv = row["tv_to_limit"].as_f64().unwrap();
        assert!((0.0..0.2).contains(&tv));
    }
    let table = std::fs::read_to_string(&table).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(Path::new(&dump).read_dir().unwrap().count() >= 2);
}
