use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn spider(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spider"))
        .args(args)
        .env_remove("SPIDER_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_of(o: &Output) -> Value {
    serde_json::from_str(stdout(o).lines().last().expect("output")).unwrap()
}

fn temp_json(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn constants_examples() {
    let o = spider(&["constants", "--p", "2", "--k", "3"]);
    assert!(o.status.success());
    let v = json_of(&o);
    assert_eq!(v["value"].as_f64().unwrap(), 1.0 + 3f64.sqrt());
    assert_eq!(v["p"].as_f64(), Some(2.0));
    assert!(v["residual"].as_f64().unwrap().abs() <= 1e-12);
    let v = json_of(&spider(&["constants", "--p", "2", "--k", "1"]));
    assert_eq!(v["value"].as_f64(), Some(2.0));
    let v = json_of(&spider(&["constants", "--r", "0.5", "--k", "3"]));
    assert!((v["value"].as_f64().unwrap() - (1.0 + 3f64.sqrt())).abs() < 1e-10);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(
        spider(&["constants", "--p", "2", "--k", "3", "--bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(spider(&["constants", "--k", "3"]).status.code(), Some(2));
    assert_eq!(
        spider(&["constants", "--p", "2", "--r", "0.4", "--k", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        spider(&["constants", "--p", "0.5", "--k", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(spider(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        spider(&["maxop", "/no/such/file.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        spider(&["verify", "--suite", "tail", "--backend", "float"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn maxop_point_and_envelope() {
    let f = temp_json(
        r#"{"k": 3, "rays": [[[0, "1/10", 1], [1, 0]], [[0, "1/10", 1], [1, 0]], [[0, "1/10", 1], [1, 0]]]}"#,
    );
    let path = f.path().to_str().unwrap();
    let v = json_of(&spider(&["maxop", path, "--ray", "2", "--pos", "3/10"]));
    assert_eq!(v["value"], Value::from("3/5"));
    let v = json_of(&spider(&[
        "maxop",
        path,
        "--backend",
        "float",
        "--ray",
        "1",
        "--pos",
        "0.05",
    ]));
    assert_eq!(v["value"].as_f64(), Some(1.0));
    let v = json_of(&spider(&["maxop", path, "--p", "2"]));
    assert_eq!(v["k"], Value::from(3));
    assert_eq!(v["function"]["rays"].as_array().unwrap().len(), 3);
    assert!(v["ratio"].as_f64().unwrap() <= 1.0 + 3f64.sqrt());
}

#[test]
fn rearrange_instance() {
    let f = temp_json(
        r#"{"probs": ["1/4", "3/4"], "values": [3, -1], "chains": [[[[1, 2]], [[1], [2]]]]}"#,
    );
    let path = f.path().to_str().unwrap();
    let v = json_of(&spider(&["rearrange", path, "--k", "2"]));
    assert_eq!(v["k"], Value::from(2));
    assert_eq!(v["rays"][0][0], serde_json::json!(["0/1", "1/4", "1/1"]));
    assert_eq!(v["rays"][1][1], serde_json::json!(["3/1", "1/1"]));
}

#[test]
fn covering_file() {
    let f = temp_json(
        r#"{"k": 1, "balls": [
            {"kind": "interval", "ray": 1, "a": 0, "b": 0.5},
            {"kind": "interval", "ray": 1, "a": 0.4, "b": 0.9},
            {"kind": "interval", "ray": 1, "a": 0.8, "b": 1}]}"#,
    );
    let o = spider(&["covering", f.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v = json_of(&o);
    assert_eq!(v["selected_indices"], serde_json::json!([1, 2, 3]));
    assert_eq!(v["multiplicity"], Value::from(2));
    assert_eq!(v["union_preserved"], Value::from(true));
    let nested = temp_json(
        r#"{"k": 2, "balls": [
            {"kind": "interval", "ray": 1, "a": 0.1, "b": 0.5},
            {"kind": "interval", "ray": 1, "a": 0.2, "b": 0.3}]}"#,
    );
    assert_eq!(
        spider(&["covering", nested.path().to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let o = spider(&["covering", nested.path().to_str().unwrap(), "--filter"]);
    assert!(o.status.success());
    assert_eq!(json_of(&o)["balls"], Value::from(1));
}

#[test]
fn sharpness_csv() {
    let o = spider(&[
        "sharpness",
        "--p",
        "2",
        "--k",
        "3",
        "--r-list",
        "0.4,0.45",
        "--points",
        "200",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,lambda,ratio,C_pk,gap"));
    let ratios: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios[0] < ratios[1]);
}

#[test]
fn verify_suites_pass_and_are_reproducible() {
    for suite in ["lemma", "weaktype", "doob", "operator", "covering"] {
        let a = spider(&["verify", "--suite", suite, "--count", "20", "--seed", "11"]);
        assert_eq!(a.status.code(), Some(0), "{suite}: {}", stdout(&a));
        let b = spider(&[
            "verify", "--suite", suite, "--count", "20", "--seed", "11", "--jobs", "2",
        ]);
        assert_eq!(a.stdout, b.stdout, "{suite}");
        assert_eq!(json_of(&a)["seed"], Value::from(11));
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_spider"));
        c.args(args).env_remove("SPIDER_SEED");
        if let Some(s) = env {
            c.env("SPIDER_SEED", s);
        }
        c.output().unwrap()
    };
    let base = ["verify", "--suite", "weaktype", "--count", "10"];
    let from_env = run(Some("42"), &base);
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "42"]);
    assert_eq!(from_env.stdout, run(None, &flagged).stdout);
    assert_ne!(from_env.stdout, run(None, &base).stdout);
}

#[test]
fn exhaustive_tail_suite() {
    let o = spider(&[
        "verify",
        "--suite",
        "tail",
        "--atoms",
        "4",
        "--k",
        "3",
        "--exhaustive",
        "--backend",
        "exact",
        "--per-union",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json_of(&o);
    assert_eq!(v["unions"], Value::from(40186));
    assert_eq!(v["tail_failures"], Value::from(0));
}
