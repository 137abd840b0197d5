use std::path::PathBuf;
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.rbpt"))
}

fn rrbpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrbpt")).args(args).output().expect("run rrbpt")
}

fn run(file: &str, args: &[&str]) -> (i32, String) {
    let path = example(file);
    let mut all = vec![args[0], path.to_str().unwrap()];
    all.extend_from_slice(&args[1..]);
    let out = rrbpt(&all);
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap() + &String::from_utf8(out.stderr).unwrap())
}

#[test]
fn every_example_checks() {
    for f in ["pq", "routing_original", "routing_revised", "spec_delivery", "tiny"] {
        let (code, out) = run(f, &["check"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains(": ok ("), "{out}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run("pq", &["bisim", "NP", "NP"]).0, 0);
    assert_eq!(run("pq", &["bisim", "NP", "NQ"]).0, 1);
    assert_eq!(run("pq", &["bisim", "NP", "Nope"]).0, 2);
    assert_eq!(rrbpt(&["check", "/no/such/file.rbpt"]).status.code(), Some(2));

    let dir = std::env::temp_dir().join(format!("rrbpt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.rbpt");
    std::fs::write(&bad, "addresses A;\nmessages m;\nnet N = dep(0)@A ||;\n").unwrap();
    let out = rrbpt(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.rbpt:3:"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dot_export_of_an_idle_node() {
    let (code, out) = run("tiny", &["lts", "N"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("digraph clts {") && out.trim_end().ends_with('}'));
    assert_eq!(out.matches(" -> ").count(), 2);
    assert!(out.contains("s0 -> s0 [label=\"{} / nrcv(m1)\"]"));
    assert_eq!(out.matches('{').count(), out.matches('}').count());
    assert_eq!(out.matches('"').count() % 2, 0);
}

#[test]
fn json_export_matches_the_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/clts.schema.json")).unwrap();
    let schema = jsonschema::JSONSchema::compile(&schema).unwrap();
    for (f, n) in [("tiny", "N"), ("pq", "NPQ"), ("pq", "Closed"), ("routing_revised", "N")] {
        let (code, out) = run(f, &["lts", n, "--format", "json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(schema.is_valid(&v), "{f} {n}");
        let states = v["states"].as_array().unwrap().len();
        for t in v["transitions"].as_array().unwrap() {
            assert!((t["src"].as_u64().unwrap() as usize) < states && (t["dst"].as_u64().unwrap() as usize) < states);
        }
    }
    let (_, out) = run("pq", &["lts", "Closed", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["states"].as_array().unwrap().len(), 2);
}

#[test]
fn state_budget_is_an_error() {
    let (code, out) = run("routing_original", &["lts", "N", "--max-states", "5"]);
    assert_eq!(code, 2);
    assert!(out.contains("error"), "{out}");
}

#[test]
fn bisim_reports_and_witnesses() {
    let (code, out) = run("routing_original", &["bisim", "HiddenN", "SpecRec", "--mode", "rb"]);
    assert_eq!(code, 1);
    assert!(out.contains("is NOT related"), "{out}");
    let (code, out) = run("pq", &["bisim", "NP", "NP", "--witness"]);
    assert_eq!(code, 0);
    let json = &out[out.find('{').unwrap()..];
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert!(v["pairs"].as_array().is_some_and(|p| !p.is_empty()));
}

#[test]
fn refine_verdicts() {
    let (code, out) = run("routing_original", &["refine", "N", "S"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("does NOT refine") && out.contains("reason:"), "{out}");
    let (code, out) = run("routing_revised", &["refine", "N", "S", "--under", "{B->C, C->A}"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn simplify_forms() {
    let (code, out) = run("pq", &["simplify", "Closed"]);
    assert_eq!(code, 0);
    assert!(out.contains("({A->B}, tau).({}, deliver)"), "{out}");
    let (code, out) = run("pq", &["simplify", "NP", "--trace"]);
    assert_eq!(code, 0);
    assert!(out.contains("Dep0"), "{out}");
}

#[test]
fn trace_finds_the_request_loop() {
    let (code, out) = run("routing_original", &["trace", "N", "--loop-without", "deliver", "--assuming", "{A=>B, B=>A}"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("s0 --({A-/->B, A->C}, tau)"), "{out}");
    assert!(out.contains("loop ("), "{out}");
    let (code, out) = run("pq", &["trace", "NPQ", "--to", "deliver.Q"]);
    assert_eq!(code, 0);
    assert!(out.contains("path (1 steps)"), "{out}");
    assert_eq!(run("pq", &["trace", "NPQ", "--to", "nowhere"]).0, 1);
}
