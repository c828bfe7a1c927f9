mod support;

use std::process::{Command, Output};

use support::{corpus_copy, fixture_path};

fn symvalic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symvalic")).args(args).env_remove("SYMVALIC_SEED").output().unwrap()
}

fn fixture(rel: &str) -> String {
    fixture_path(rel).to_string_lossy().into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn scan_safe_is_clean() {
    let out = symvalic(&["scan", &fixture("safe.svc")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "symvalic-warnings/1");
    assert_eq!(v["warnings"], serde_json::json!([]));
}

#[test]
fn scan_unguarded_selfdestruct_warns() {
    let out = symvalic(&["scan", &fixture("unguarded_selfdestruct.svc")]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let unguarded: Vec<_> = v["warnings"].as_array().unwrap().iter().filter(|w| w["kind"] == "UNGUARDED_SENSITIVE").collect();
    assert_eq!(unguarded.len(), 1);
}

#[test]
fn syntax_error_exits_two_without_json() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.svc");
    std::fs::write(&bad, "contract Bad {\n    function f( }\n").unwrap();
    let out = symvalic(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.svc:2:"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(symvalic(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(symvalic(&["--tx-rounds", "0", "analyze", &fixture("safe.svc")]).status.code(), Some(2));
    assert_eq!(symvalic(&["--guarded-frac", "1.5", "corpus-scan", &fixture("swap_corpus")]).status.code(), Some(2));
    assert_eq!(symvalic(&["scan", &fixture("safe.svc"), "--facts", "/nonexistent/facts.json"]).status.code(), Some(2));
    assert_eq!(symvalic(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_emits_result_json() {
    let out = symvalic(&["analyze", &fixture("whichpaths.svc")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "symvalic-result/1");
    assert_eq!(v["contract"], "WhichPaths");
    let mut returns: Vec<String> = v["returns"].as_array().unwrap().iter().map(|r| r["value"].as_str().unwrap().to_string()).collect();
    returns.sort();
    returns.dedup();
    assert_eq!(returns, ["0x10", "0x3", "0x9"]);
}

#[test]
fn truncation_exits_three() {
    let out = symvalic(&["--max-inferences", "1", "analyze", &fixture("whichpaths.svc")]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["truncated"], true);
}

#[test]
fn seed_falls_back_to_environment() {
    let file = fixture("swap_corpus/01_alder.svc");
    let by_flag = symvalic(&["--seed", "7", "analyze", &file]).stdout;
    let by_env = Command::new(env!("CARGO_BIN_EXE_symvalic")).args(["analyze", &file]).env("SYMVALIC_SEED", "7").output().unwrap().stdout;
    assert_eq!(by_flag, by_env);
    assert_ne!(by_flag, symvalic(&["--seed", "8", "analyze", &file]).stdout);
}

#[test]
fn text_format_renders_the_same_warnings() {
    let file = fixture("unguarded_selfdestruct.svc");
    let v = json(&symvalic(&["scan", &file]));
    let text = String::from_utf8(symvalic(&["--format", "text", "scan", &file]).stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let warnings = v["warnings"].as_array().unwrap();
    assert_eq!(lines.len(), warnings.len());
    for (line, w) in lines.iter().zip(warnings) {
        assert!(line.starts_with(w["kind"].as_str().unwrap()));
        assert!(line.contains(w["explanation"].as_str().unwrap()));
        assert!(line.contains(w["witness"]["deps"].as_str().unwrap()));
    }
}

#[test]
fn corpus_scan_reports_the_anomaly() {
    let dir = corpus_copy("swap_corpus");
    let out = symvalic(&["--jobs", "2", "corpus-scan", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let w = v["warnings"].as_array().unwrap();
    assert_eq!(w.len(), 1);
    assert_eq!(w[0]["kind"], "CORPUS_ANOMALY");
    assert_eq!(w[0]["contract"], "ConverterWillow");
}

#[test]
fn corpus_infer_then_scan_with_facts() {
    let dir = corpus_copy("reentrancy_corpus");
    let out = symvalic(&["corpus-infer", dir.path().to_str().unwrap(), "--rounds", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let facts = json(&out);
    assert_eq!(facts["schema"], "symvalic-facts/1");
    assert_eq!(facts["round"], 2);
    assert_eq!(facts["converged"], true);
    let facts_path = dir.path().join("out/facts.round-2.json");
    let out = symvalic(&["scan", dir.path().join("vault.svc").to_str().unwrap(), "--facts", facts_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["warnings"][0]["kind"], "REENTRANCY");
    let careful = symvalic(&["scan", dir.path().join("careful_vault.svc").to_str().unwrap(), "--facts", facts_path.to_str().unwrap()]);
    assert_eq!(careful.status.code(), Some(0));
}

#[test]
fn corpus_build_prints_summaries() {
    let dir = corpus_copy("reentrancy_corpus");
    let out = symvalic(&["corpus-build", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "symvalic-summaries/1");
    assert!(dir.path().join("out/vault.result.json").exists());
}

#[test]
fn corpus_parse_failure_exits_two_after_the_rest() {
    let dir = corpus_copy("swap_corpus");
    std::fs::write(dir.path().join("00_broken.svc"), "contract {").unwrap();
    let out = symvalic(&["corpus-scan", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["warnings"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("00_broken.svc:1:"));
}
