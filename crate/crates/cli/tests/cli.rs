use std::process::{Command, Output};

use serde_json::Value;

fn genlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genlab")).args(args).output().expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad line {l:?}: {e}")))
        .collect()
}

fn of_kind<'a>(rs: &'a [Value], kind: &str) -> Vec<&'a Value> {
    rs.iter().filter(|r| r["record"] == kind).collect()
}

#[test]
fn dim_parity_values_and_bounds() {
    let out = genlab(&["dim", "--class", "builtin:parity", "--n", "0,1,2"]);
    assert!(out.status.success());
    let rs = records(&out);
    let nc = of_kind(&rs, "nc");
    let values: Vec<&str> = nc.iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["0", "2", "4"]);
    let bounds: Vec<u64> = nc.iter().map(|r| r["bound"].as_u64().unwrap()).collect();
    assert_eq!(bounds, [1, 3, 5]);
    assert_eq!(nc[1]["witness"].as_array().unwrap().len(), 2);
    assert_eq!(of_kind(&rs, "summary")[0]["d_max"], 0);
}

#[test]
fn dim_prime_powers_budgeted() {
    let out = genlab(&["dim", "--class", "builtin:prime_powers", "--n", "0,1", "--budget", "16"]);
    assert!(out.status.success());
    let rs = records(&out);
    let values: Vec<&str> = of_kind(&rs, "nc").iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["0", ">=16"]);
}

#[test]
fn dim_missing_spec_fails() {
    let out = genlab(&["dim", "--class", "missing.spec"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn play_und_on_noisy_parity_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    let args = |out: String| {
        vec![
            "play",
            "--class",
            "builtin:parity",
            "--generator",
            "und",
            "--hypothesis",
            "h_e",
            "--stream",
            "noisy:1",
            "--seed",
            "3",
            "--horizon",
            "50",
            "--out",
        ]
        .into_iter()
        .map(String::from)
        .chain([out])
        .collect::<Vec<_>>()
    };
    let run = |out: String| {
        let a = args(out);
        genlab(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let first = run(path("a.jsonl"));
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let verdict = &records(&first)[0];
    assert_eq!(verdict["passed"], true);
    assert_eq!(verdict["d_star"], 3);
    let second = run(path("b.jsonl"));
    assert!(second.status.success());
    let a = std::fs::read(path("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(path("b.jsonl")).unwrap());
    let lines: Vec<Value> = String::from_utf8(a).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[0]["record"], "header");
    assert_eq!(lines[0]["noise_positions"].as_array().unwrap().len(), 1);
}

#[test]
fn play_limit_on_prime_powers_reports_t_star() {
    let out = genlab(&[
        "play",
        "--generator",
        "limit(inner=nonuniform)",
        "--class",
        "builtin:prime_powers",
        "--stream",
        "noisy-enum",
        "--horizon",
        "300",
    ]);
    assert!(out.status.success());
    let rs = records(&out);
    assert_eq!(of_kind(&rs, "round").len(), 300);
    let v = of_kind(&rs, "verdict")[0];
    assert_eq!(v["mode"], "limit");
    assert!(v["t_star"].as_u64().unwrap() <= 300);
}

#[test]
fn play_horizon_zero_fails() {
    let out = genlab(&["play", "--class", "builtin:parity", "--horizon", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn play_unknown_stream_fails() {
    let out = genlab(&["play", "--class", "builtin:parity", "--stream", "bursty"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn play_failed_verdict_exits_with_contract_code() {
    // A single fixed hypothesis cannot avoid the other parity's stream forever.
    let out = genlab(&[
        "play",
        "--class",
        "builtin:parity",
        "--generator",
        "trivial:h_o",
        "--hypothesis",
        "h_e",
        "--horizon",
        "20",
        "--d-star",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(6));
    assert_eq!(of_kind(&records(&out), "verdict")[0]["passed"], false);
}

fn adversary_record(out: &Output) -> Value {
    of_kind(&records(out), "adversary")[0].clone()
}

#[test]
fn adversary_nc_necessity_confirms_mistake() {
    let out = genlab(&[
        "adversary",
        "nc-necessity",
        "--class",
        "builtin:prime_powers",
        "--n",
        "1",
        "--d",
        "5",
        "--target",
        "und",
    ]);
    assert!(out.status.success());
    let r = adversary_record(&out);
    assert_eq!(r["confirmed"], true);
    assert!(r["first_mistake"].as_u64().unwrap() <= r["predicted_mistake_round"].as_u64().unwrap());
}

#[test]
fn adversary_ung_necessity_round_two() {
    let out =
        genlab(&["adversary", "ung-necessity", "--class", "builtin:parity", "--d", "2", "--target", "trivial-union"]);
    assert!(out.status.success());
    let r = adversary_record(&out);
    assert_eq!(r["predicted_mistake_round"], 2);
    assert_eq!(r["confirmed"], true);
}

#[test]
fn adversary_parity_reports_case() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl").display().to_string();
    let out = genlab(&["adversary", "parity", "--target", "limit", "--probe", "40", "--d", "3", "--out", &path]);
    match out.status.code() {
        Some(0) => {
            let r = adversary_record(&out);
            assert!(r["case"].is_string());
            assert!(std::fs::read_to_string(&path).unwrap().starts_with("{\"record\":\"header\""));
        }
        Some(5) => {}
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn adversary_error_exit_codes() {
    let no_witness = genlab(&["adversary", "nc-necessity", "--class", "builtin:parity", "--n", "0", "--d", "2"]);
    assert_eq!(no_witness.status.code(), Some(3));
    let precondition = genlab(&["adversary", "altung", "--class", "builtin:union_demo", "--d", "2"]);
    assert_eq!(precondition.status.code(), Some(4));
    let probe = genlab(&["adversary", "parity", "--target", "und", "--probe", "3", "--d", "3"]);
    assert_eq!(probe.status.code(), Some(4));
}

#[test]
fn verify_single_suite_and_unknown() {
    let out = genlab(&["verify", "dim-oracle"]);
    assert!(out.status.success());
    let r = &records(&out)[0];
    assert_eq!(r["suite"], "dim-oracle");
    assert_eq!(r["passed"], true);
    let bad = genlab(&["verify", "nosuch"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown suite"));
}

#[test]
fn classes_list_show_validate() {
    let list = records(&genlab(&["classes", "list"]));
    let names: Vec<&str> = list.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["parity", "prime_powers", "union_demo"]);

    let shown = genlab(&["classes", "show", "builtin:union_demo"]);
    assert!(shown.status.success());
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("union_demo.json");
    std::fs::write(&good, &shown.stdout).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"atoms": [], "kind": "finite", "hypotheses": [], "extra": 1}"#).unwrap();

    let ok = genlab(&["classes", "validate", good.to_str().unwrap()]);
    assert!(ok.status.success());
    assert_eq!(records(&ok)[0]["record"], "valid");

    let mixed = genlab(&["classes", "validate", good.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(mixed.status.code(), Some(1));
    let kinds: Vec<String> = records(&mixed).iter().map(|r| r["record"].as_str().unwrap().to_string()).collect();
    assert_eq!(kinds, ["valid", "invalid"]);

    // The round-tripped file behaves like the builtin.
    let a = genlab(&["dim", "--class", "builtin:union_demo", "--n", "0,1"]);
    let b = genlab(&["dim", "--class", good.to_str().unwrap(), "--n", "0,1"]);
    let values = |o: &Output| of_kind(&records(o), "nc").iter().map(|r| r["value"].clone()).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
}

#[test]
fn pretty_output_is_not_json() {
    let out = genlab(&["--pretty", "dim", "--class", "builtin:parity", "--n", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().next().unwrap().starts_with("record=nc"));
}
