use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn tollcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tollcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is json")
}

fn close(v: &Value, want: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() < 1e-9
}

#[test]
fn wardrop_fig_alg() {
    let out = tollcap(&["wardrop", "--preset", "fig-alg", "--tolls", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!(close(&v["x"][0], 0.75) && close(&v["x"][1], 0.25));
    assert!(close(&v["cost"], 0.75));

    let out = tollcap(&["wardrop", "--preset", "fig-alg", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("link,toll,x,latency,effective_cost")
    );
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn optimal_cap_fig_alg() {
    let out = tollcap(&["optimal-cap", "--preset", "fig-alg"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!(close(&v["c_star"], 1.0));
    assert!(close(&v["cost_at_star"], 0.71875));
    assert!(close(&v["breakpoints"][0], 7.0 / 6.0));
    assert!(close(&v["breakpoints"][1], 0.5));
}

#[test]
fn spne_uncapped_fig_bad() {
    let out = tollcap(&["spne", "--preset", "fig-bad", "--a2", "2", "--cap", "inf"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["status"], "unique");
    let t = &v["equilibria"][0]["tolls"];
    // markups are 3 on both links, so x = (5/9, 4/9)
    assert!(close(&t[0], 5.0 / 3.0) && close(&t[1], 4.0 / 3.0));
}

#[test]
fn duopoly_search_none_found_exits_4() {
    let out = tollcap(&[
        "duopoly-search",
        "--preset",
        "fig-non",
        "--cap",
        "1.0",
        "--grid-n",
        "400",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json_of(&out)["status"], "none_found");
}

#[test]
fn not_applicable_exits_3_with_validation() {
    let out = tollcap(&["optimal-cap", "--preset", "fig-mul"]);
    assert_eq!(out.status.code(), Some(3));
    let v = stderr_json(&out);
    assert_eq!(v["status"], "not_applicable");
    assert_eq!(v["validation"]["full_support"], false);
}

#[test]
fn invalid_instance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, r#"{"demand": 1, "links": [{"kind": "affine", "a": -1, "b": 0}, {"kind": "affine", "a": 1, "b": 0}]}"#).unwrap();
    let out = tollcap(&["wardrop", "--instance", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = stderr_json(&out);
    assert_eq!(v["error"], "invalid instance");
    assert_eq!(v["links"][0], 0);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    fs::write(&p, "{ not json").unwrap();
    assert_eq!(
        tollcap(&["wardrop", "--instance", p.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tollcap(&["wardrop", "--preset", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(tollcap(&["wardrop"]).status.code(), Some(1));
    assert_eq!(tollcap(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        tollcap(&["optimal-flow", "--preset", "fig-alg", "--format", "csv"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(tollcap(&["--help"]).status.code(), Some(0));
}

#[test]
fn instance_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("inst.json");
    fs::write(&p, r#"{"demand": 1, "links": [{"kind": "affine", "a": 1, "b": 0}, {"kind": "affine", "a": 1, "b": 0.5}]}"#).unwrap();
    let from_file = tollcap(&["optimal-cap", "--instance", p.to_str().unwrap()]);
    let from_preset = tollcap(&["optimal-cap", "--preset", "fig-alg"]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(from_file.stdout, from_preset.stdout);
}

#[test]
fn sweep_csv_header_and_rows() {
    let out = tollcap(&[
        "sweep", "--preset", "fig-alg", "--c-hi", "1.5", "--steps", "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "c,K,cost,t_1,t_2,x_1,x_2");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[3], "1,1.625,0.71875,1,0.75,0.625,0.375");
}

#[test]
fn output_file_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = tollcap(&[
            "report",
            "--preset",
            "fig-alg",
            "--output",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_tollcap"))
            .args([
                "duopoly-search",
                "--preset",
                "fig-non",
                "--cap",
                "0.3",
                "--grid-n",
                "400",
            ])
            .env("TOLLCAP_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn verify_accepts_spne_and_optimal_cap_output() {
    let dir = tempfile::tempdir().unwrap();
    for (args, file) in [
        (
            vec!["spne", "--preset", "fig-alg", "--cap", "1"],
            "spne.json",
        ),
        (vec!["optimal-cap", "--preset", "fig-alg"], "cap.json"),
    ] {
        let p = dir.path().join(file);
        let mut full = args.clone();
        full.extend(["--output", p.to_str().unwrap()]);
        assert_eq!(tollcap(&full).status.code(), Some(0));
        let out = tollcap(&[
            "verify",
            "--preset",
            "fig-alg",
            "--result",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{file}");
        assert_eq!(json_of(&out)["passed"], true);
    }
}

#[test]
fn verify_rejects_profitable_deviation() {
    let out = tollcap(&[
        "verify", "--preset", "fig-alg", "--tolls", "0,0", "--cap", "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let v = json_of(&out);
    assert_eq!(v["passed"], false);
    assert!(v["max_deviation_gain"].as_f64().unwrap() > 0.1);
}

#[test]
fn bounds_table() {
    let out = tollcap(&["bounds", "--d-max", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,upper_bound,lower_bound_nonexistence");
    assert!(lines[1].starts_with("1,1.14285714286,"));
    assert!(lines[3].starts_with("3,1.3093"));
}

#[test]
fn best_response_table_fig_non() {
    let out = tollcap(&[
        "best-response",
        "--preset",
        "fig-non",
        "--firm",
        "0",
        "--table",
        "--t-max",
        "3",
        "--steps",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("t_opponent,br_lo,br_hi,profit"));
    assert_eq!(text.lines().count(), 5);
}
