use std::process::{Command, Output};

use padic_affine::literal;
use padic_affine::padic::Prime;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_padic-affine");
const CORPUS: &str = include_str!("data/corpus.tsv");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("PADIC_AFFINE_SEED")
        .env_remove("PADIC_AFFINE_P")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn corpus() -> Vec<(u64, &'static str)> {
    CORPUS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (p, lit) = l.split_once('\t').expect("tab separated");
            (p.parse().expect("prime"), lit)
        })
        .collect()
}

#[test]
fn corpus_covers_every_type() {
    let entries = corpus();
    assert!(entries.len() >= 50);
    let mut kinds: Vec<&str> = entries
        .iter()
        .map(|(p, lit)| literal::parse(lit, Prime::new(*p).unwrap()).unwrap().type_name())
        .collect();
    kinds.sort();
    kinds.dedup();
    assert_eq!(kinds.len(), 6, "{kinds:?}");
}

#[test]
fn corpus_round_trips_in_process() {
    for (p, lit) in corpus() {
        let prime = Prime::new(p).unwrap();
        let value = literal::parse(lit, prime).unwrap();
        assert_eq!(literal::print(&value), lit);
        assert_eq!(literal::parse(&literal::print(&value), prime).unwrap(), value);
    }
}

#[test]
fn corpus_round_trips_through_binary() {
    for (p, lit) in corpus().into_iter().step_by(5) {
        let out = run(&["--p", &p.to_string(), "parse", lit]);
        assert!(out.status.success(), "{lit}");
        assert_eq!(json(&out)["canonical"], lit);
    }
}

#[test]
fn malformed_literal_exits_2() {
    let out = run(&["parse", "B(0;"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1:5"), "{err}");
}

#[test]
fn overlapping_parts_exit_2() {
    let out = run(&["parse", "{B(0;0): 1, B(1;0): 2 | tail 0}"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
}

#[test]
fn composite_prime_and_bad_flags_exit_2() {
    assert_eq!(run(&["--p", "4", "parse", "7"]).status.code(), Some(2));
    assert_eq!(run(&["verify-all", "--bogus"]).status.code(), Some(2));
    let out = run(&["--samples", "10", "rn", "--g", "aff(a = {B(0;0): 3 | tail 1}, b = {| tail 0})", "--f", "{B(0;0): 1/2 | tail 0}"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pushforward_of_expanding_scaling() {
    let out = run(&["pushforward", "--g", "aff(a = {B(0;0): 3 | tail 1}, b = {B(0;0): 0 | tail 0})"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["command"], "pushforward");
    assert_eq!(
        v["density"],
        "{B(0; 0): 1/3, B(1/3; 0): 4/3, B(2/3; 0): 4/3 | tail 1}"
    );
}

#[test]
fn unitarity_on_contracting_scaling_is_a_finding() {
    let out = run(&[
        "unitarity",
        "--g",
        "aff(a = {B(0;0): 1/3 | tail 1}, b = {| tail 0})",
        "--f",
        "{B(0;0): 1/2 | tail 0}",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["failures"], 0);
    assert!(v["findings"].as_u64().unwrap() >= 1);
    let reports = v["reports"].as_array().unwrap();
    let audit = reports.iter().find(|r| r["kind"] == "audit").unwrap();
    assert!(audit["note"].as_str().unwrap().contains("1/3"), "{audit}");
}

#[test]
fn laplace_and_rn_pass_on_expanding_scaling() {
    let g = "aff(a = {B(0;0): 3 | tail 1}, b = {| tail 0})";
    for cmd in ["laplace", "rn"] {
        let out = run(&[cmd, "--g", g, "--f", "{B(0;1): 1/4 | tail 0}"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&out)["failures"], 0);
    }
}

#[test]
fn decouple_reports_postconditions() {
    let out = run(&["decouple", "--l1", "{B(0;0)}", "--l2", "{B(1/3;-1)}"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["command"], "decouple");
    assert_eq!(v["failures"], 0);
}

#[test]
fn sample_is_seeded() {
    let args = ["--seed", "9", "sample", "--mu", "{B(0;0): 2 | tail 1}", "-n", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["--seed", "10", "sample", "--mu", "{B(0;0): 2 | tail 1}", "-n", "5"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn verify_all_is_deterministic_across_workers() {
    let base = ["--p", "3", "--seed", "42", "--samples", "4000", "verify-all", "--trials", "10"];
    let one = run(&[&["--workers", "1"][..], &base[..]].concat());
    let four = run(&[&["--workers", "4"][..], &base[..]].concat());
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn audit_exits_zero_with_findings() {
    let out = run(&["audit", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["failures"], 0);
}

#[test]
fn json_flag_writes_the_report() {
    let dir = std::env::temp_dir().join(format!("padic-affine-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = run(&["--json", path.to_str().unwrap(), "parse", "B(0;0)"]);
    assert!(out.status.success());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written, json(&out));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn literal_may_come_from_a_file() {
    let dir = std::env::temp_dir().join(format!("padic-affine-file-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.txt");
    std::fs::write(&path, "aff(a = {B(0;0): 3 | tail 1},\n    b = {| tail 0})\n").unwrap();
    let out = run(&["pushforward", "--g", path.to_str().unwrap()]);
    assert!(out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}
