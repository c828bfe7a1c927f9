mod support;

use std::sync::Arc;

use symvalic::clients::*;
use symvalic::corpus::{DomainFacts, GuardFact, VoteFact};
use symvalic::ir::parse;
use symvalic::symexpr::Expr;
use symvalic::valueflow::{analyze, AnalysisConfig, AnalysisResult};

use support::fixture_path;

fn run(name: &str) -> AnalysisResult {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    analyze(Arc::new(parse(&text).unwrap()), &AnalysisConfig::default()).unwrap()
}

fn run_src(src: &str) -> AnalysisResult {
    analyze(Arc::new(parse(src).unwrap()), &AnalysisConfig::default()).unwrap()
}

fn reentrancy_facts(sig: &str) -> DomainFacts {
    let mut f = DomainFacts::default();
    f.reentrancy_allowing.insert(sig.into(), VoteFact { signature: sig.into(), position: None, votes: 1, round: 1 });
    f
}

fn swap_guarded_facts() -> DomainFacts {
    let mut f = DomainFacts::default();
    f.usually_guarded.insert("swap".into(), GuardFact { signature: "swap".into(), guarded: 19, unguarded: 1, samples: 20, fraction: 0.95, round: 1 });
    f.monetary.insert(("swap".into(), 1), VoteFact { signature: "swap".into(), position: Some(1), votes: 19, round: 1 });
    f
}

#[test]
fn unguarded_selfdestruct_is_flagged_once() {
    let r = run("unguarded_selfdestruct.svc");
    let w = detect_unguarded_sensitive(&r);
    assert_eq!(w.len(), 1);
    assert_eq!(w[0].signature, "SELFDESTRUCT");
    assert_eq!(w[0].witness.deps, "<{} ; {sender -> <<unprivileged-user>>}>");
}

#[test]
fn guarded_selfdestruct_is_clean() {
    let r = run("sensitive_guarded.svc");
    assert!(detect_unguarded_sensitive(&r).is_empty());
    assert!(scan(&r, &DomainFacts::default()).warnings.is_empty());
}

#[test]
fn forwarded_transfer_from_argument_is_tainted() {
    let r = run("pull_unchecked.svc");
    let det = detect_tainted_sensitive_arg(&r, &builtin_specs());
    assert!(det.diagnostics.is_empty());
    // numeric parameters are seeded with constants, and the recipient is the caller itself
    assert_eq!(det.warnings.len(), 1, "{:#?}", det.warnings);
    assert_eq!(det.warnings[0].position, Some(0));
    assert_eq!(det.warnings[0].witness.value.as_deref(), Some("<<user-unique-value>>"));
    assert!(det.warnings.iter().all(|w| w.signature == "transferFrom" && w.kind == WarningKind::TaintedSensitiveArg));
}

#[test]
fn owner_gate_removes_transfer_from_taint() {
    let r = run("pull_guarded.svc");
    assert!(detect_tainted_sensitive_arg(&r, &builtin_specs()).warnings.is_empty());
}

#[test]
fn empty_spec_set_finds_nothing() {
    let r = run("pull_unchecked.svc");
    assert_eq!(detect_tainted_sensitive_arg(&r, &[]), Detection::default());
}

#[test]
fn arity_misfit_skips_spec_with_diagnostic() {
    let r = run("pull_unchecked.svc");
    let det = detect_tainted_sensitive_arg(&r, &[SensitiveOpSpec::new("transferFrom", [5], SpecSource::CorpusInferred)]);
    assert!(det.warnings.is_empty());
    assert_eq!(det.diagnostics.len(), 1);
    assert!(det.diagnostics[0].contains("spec skipped"));
}

#[test]
fn call_then_store_is_reentrant() {
    let r = run("notify_then_store.svc");
    let w = detect_reentrancy(&r, &reentrancy_facts("notify"));
    assert_eq!(w.len(), 1);
    assert_eq!((w[0].function.as_str(), w[0].signature.as_str()), ("withdraw", "notify"));
    assert!(detect_reentrancy(&r, &reentrancy_facts("ping")).is_empty());
    assert!(detect_reentrancy(&r, &DomainFacts::default()).is_empty());
}

#[test]
fn store_then_call_is_not_reentrant() {
    let r = run_src(
        "contract V { address hub; mapping balance;
           function constructor() public { hub = 0x4b0b; }
           function withdraw() public { balance[msg.sender] = 0; call hub.notify(msg.sender); } }",
    );
    assert!(detect_reentrancy(&r, &reentrancy_facts("notify")).is_empty());
}

const PUBLIC_SWAP: &str = "contract P { address router;
    function constructor() public { router = 0x5a13; }
    function convert(uint amount) public { call router.swap(0xe000, amount); } }";

const OWNER_SWAP: &str = "contract P { address router; address owner;
    function constructor() public { router = 0x5a13; owner = msg.sender; }
    function convert(uint amount) public { require(msg.sender == owner); call router.swap(0xe000, amount); } }";

#[test]
fn publicly_reachable_guarded_swap_is_flagged() {
    let w = detect_untrusted_reachability(&run_src(PUBLIC_SWAP), &swap_guarded_facts());
    assert_eq!(w.len(), 1);
    assert!(w[0].explanation.contains("0.95") && w[0].explanation.contains("20"), "{}", w[0].explanation);
    assert!(detect_untrusted_reachability(&run_src(OWNER_SWAP), &swap_guarded_facts()).is_empty());
}

#[test]
fn untrusted_reachability_needs_a_fact() {
    let mut facts = swap_guarded_facts();
    facts.usually_guarded.clear();
    assert!(detect_untrusted_reachability(&run_src(PUBLIC_SWAP), &facts).is_empty());
}

#[test]
fn witnesses_carry_the_untrusted_sender() {
    let facts = {
        let mut f = swap_guarded_facts();
        f.reentrancy_allowing = reentrancy_facts("notify").reentrancy_allowing;
        f
    };
    for name in ["unguarded_selfdestruct.svc", "pull_unchecked.svc", "notify_then_store.svc"] {
        for w in scan(&run(name), &facts).warnings {
            assert!(w.witness.deps.contains("sender -> <<unprivileged-user>>"), "{w}");
        }
    }
}

#[test]
fn warnings_are_sorted_and_serialized() {
    let r = run("unguarded_selfdestruct.svc");
    let w = scan(&r, &DomainFacts::default()).warnings;
    let mut sorted = w.clone();
    sorted.sort();
    assert_eq!(w, sorted);
    let v: serde_json::Value = serde_json::from_str(&warnings_to_json(&w)).unwrap();
    assert_eq!(v["schema"], WARNINGS_SCHEMA);
    assert_eq!(v["warnings"][0]["kind"], "UNGUARDED_SENSITIVE");
    assert_eq!(v["warnings"][1]["kind"], "TAINTED_SENSITIVE_ARG");
    assert_eq!(v["warnings"][0]["witness"]["deps"], "<{} ; {sender -> <<unprivileged-user>>}>");
    assert_eq!(warnings_to_text(&w).lines().count(), w.len());
}

#[test]
fn taint_needs_the_untrusted_sender() {
    let r = run("pull_unchecked.svc");
    let call = &r.calls[0];
    for a in &call.args[0] {
        assert_eq!(is_tainted(a), a.value == Expr::user_unique_value() && a.deps.has_sender(&Expr::unprivileged_user()));
    }
}
