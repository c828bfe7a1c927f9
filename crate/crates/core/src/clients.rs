//! Vulnerability detectors, written as queries over an [`AnalysisResult`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::DomainFacts;
use crate::deps::DependencyMap;
use crate::ir::{Op, StmtId};
use crate::symexpr::{Expr, Symbol};
use crate::valueflow::{AnalysisResult, ArgValue, CallFact, Callee, ReachabilityFact};

pub const WARNINGS_SCHEMA: &str = "symvalic-warnings/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WarningKind {
    UnguardedSensitive,
    TaintedSensitiveArg,
    Reentrancy,
    UntrustedReachability,
    CorpusAnomaly,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarningKind::UnguardedSensitive => "UNGUARDED_SENSITIVE",
            WarningKind::TaintedSensitiveArg => "TAINTED_SENSITIVE_ARG",
            WarningKind::Reentrancy => "REENTRANCY",
            WarningKind::UntrustedReachability => "UNTRUSTED_REACHABILITY",
            WarningKind::CorpusAnomaly => "CORPUS_ANOMALY",
        })
    }
}

/// The fact a warning rests on, printed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Witness {
    /// The tainted value, for argument warnings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub deps: String,
}

impl Witness {
    fn reach(r: &ReachabilityFact) -> Self {
        Witness { value: None, deps: r.deps.to_string() }
    }

    fn arg(a: &ArgValue) -> Self {
        Witness { value: Some(a.value.to_string()), deps: a.deps.to_string() }
    }
}

/// Field order is the report order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Warning {
    pub contract: String,
    pub function: String,
    pub stmt: StmtId,
    pub kind: WarningKind,
    /// Argument position, for argument warnings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    pub signature: String,
    pub witness: Witness,
    pub explanation: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}.{}:{} {}", self.kind, self.contract, self.function, self.stmt, self.explanation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecSource {
    Builtin,
    CorpusInferred,
}

/// Which arguments of a call are sensitive. Positions count call arguments,
/// not the target of an external call.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitiveOpSpec {
    pub callee_signature: String,
    pub sensitive_arg_positions: BTreeSet<usize>,
    pub source: SpecSource,
}

impl SensitiveOpSpec {
    pub fn new(signature: &str, positions: impl IntoIterator<Item = usize>, source: SpecSource) -> Self {
        SensitiveOpSpec { callee_signature: signature.to_string(), sensitive_arg_positions: positions.into_iter().collect(), source }
    }
}

pub fn builtin_specs() -> Vec<SensitiveOpSpec> {
    vec![
        SensitiveOpSpec::new("TRANSFER", [0, 1], SpecSource::Builtin),
        SensitiveOpSpec::new("SELFDESTRUCT", [0], SpecSource::Builtin),
        SensitiveOpSpec::new("DELEGATECALL", [0], SpecSource::Builtin),
        SensitiveOpSpec::new("transferFrom", [0, 1, 2], SpecSource::Builtin),
    ]
}

/// Warnings plus notes about specs that could not be applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Detection {
    pub warnings: Vec<Warning>,
    pub diagnostics: Vec<String>,
}

fn untrusted() -> DependencyMap {
    DependencyMap::new().with_sender(&Expr::unprivileged_user())
}

/// A value the attacker chose, seen under the attacker's own transaction.
pub fn is_tainted(a: &ArgValue) -> bool {
    a.value.contains_sym(Symbol::USER_UNIQUE_VALUE) && a.deps.has_sender(&Expr::unprivileged_user())
}

fn first_untrusted_reach(r: &AnalysisResult, stmt: StmtId) -> Option<&ReachabilityFact> {
    r.stmt_reachable(stmt, &untrusted()).into_iter().next()
}

fn warning(r: &AnalysisResult, call: &CallFact, kind: WarningKind, position: Option<usize>, witness: Witness, explanation: String) -> Warning {
    Warning {
        contract: r.contract_name.clone(),
        function: call.function.clone(),
        stmt: call.stmt,
        kind,
        position,
        signature: call.callee.signature().to_string(),
        witness,
        explanation,
    }
}

fn sorted(mut w: Vec<Warning>) -> Vec<Warning> {
    w.sort();
    w.dedup();
    w
}

/// Sensitive intrinsics an unprivileged caller can reach.
pub fn detect_unguarded_sensitive(r: &AnalysisResult) -> Vec<Warning> {
    let mut out = Vec::new();
    for call in r.calls.iter().filter(|c| !matches!(c.callee, Callee::External(_))) {
        if let Some(reach) = first_untrusted_reach(r, call.stmt) {
            let explanation = format!("{} is reachable by an unprivileged caller", call.callee.signature());
            out.push(warning(r, call, WarningKind::UnguardedSensitive, None, Witness::reach(reach), explanation));
        }
    }
    sorted(out)
}

/// Sensitive call arguments an unprivileged caller can choose.
pub fn detect_tainted_sensitive_arg(r: &AnalysisResult, specs: &[SensitiveOpSpec]) -> Detection {
    let mut det = Detection::default();
    for spec in specs {
        let calls: Vec<&CallFact> = r.calls.iter().filter(|c| c.callee.signature() == spec.callee_signature).collect();
        if let Some(bad) = calls.iter().find(|c| spec.sensitive_arg_positions.iter().any(|p| *p >= c.args.len())) {
            det.diagnostics.push(format!(
                "{}: spec for {} names positions {:?} but the call at {} has {} arguments; spec skipped",
                r.contract_name,
                spec.callee_signature,
                spec.sensitive_arg_positions,
                bad.stmt,
                bad.args.len()
            ));
            continue;
        }
        for call in calls {
            for &pos in &spec.sensitive_arg_positions {
                if let Some(a) = call.args[pos].iter().find(|a| is_tainted(a)) {
                    let explanation = format!("argument {pos} of {} can be chosen by an unprivileged caller", spec.callee_signature);
                    det.warnings.push(warning(r, call, WarningKind::TaintedSensitiveArg, Some(pos), Witness::arg(a), explanation));
                }
            }
        }
    }
    det.warnings = sorted(det.warnings);
    det
}

/// Calls to reentrancy-allowing signatures followed by a storage write.
pub fn detect_reentrancy(r: &AnalysisResult, facts: &DomainFacts) -> Vec<Warning> {
    let mut out = Vec::new();
    for call in &r.calls {
        let Callee::External(sig) = &call.callee else { continue };
        if !facts.is_reentrancy_allowing(sig) {
            continue;
        }
        let Some(reach) = first_untrusted_reach(r, call.stmt) else { continue };
        let Some(f) = r.contract.function(&call.function) else { continue };
        let after = f.reachable_after(call.stmt);
        let store = f.statements().find(|s| s.op == Op::Sstore && after.contains(&s.id));
        if let Some(store) = store {
            let explanation = format!("call to {sig} may re-enter before the storage write at {}", store.id);
            out.push(warning(r, call, WarningKind::Reentrancy, None, Witness::reach(reach), explanation));
        }
    }
    sorted(out)
}

/// Unprivileged reach of monetary calls that other contracts usually guard.
pub fn detect_untrusted_reachability(r: &AnalysisResult, facts: &DomainFacts) -> Vec<Warning> {
    let mut out = Vec::new();
    for call in &r.calls {
        let Callee::External(sig) = &call.callee else { continue };
        let Some(g) = facts.guarded_fact(sig) else { continue };
        if !facts.is_monetary(sig) {
            continue;
        }
        if let Some(reach) = first_untrusted_reach(r, call.stmt) {
            let explanation = format!(
                "{sig} is guarded in a fraction {} of {} corpus call sites but an unprivileged caller reaches it here",
                g.fraction, g.samples
            );
            out.push(warning(r, call, WarningKind::UntrustedReachability, None, Witness::reach(reach), explanation));
        }
    }
    sorted(out)
}

/// All detectors: the built-in sensitive specs plus the fact-driven checks.
pub fn scan(r: &AnalysisResult, facts: &DomainFacts) -> Detection {
    let mut det = detect_tainted_sensitive_arg(r, &builtin_specs());
    det.warnings.extend(detect_unguarded_sensitive(r));
    det.warnings.extend(detect_reentrancy(r, facts));
    det.warnings.extend(detect_untrusted_reachability(r, facts));
    det.warnings = sorted(det.warnings);
    det
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    warnings: &'a [Warning],
}

pub fn warnings_to_json(warnings: &[Warning]) -> String {
    serde_json::to_string_pretty(&Report { schema: WARNINGS_SCHEMA, warnings }).expect("warnings serialize")
}

pub fn warnings_to_text(warnings: &[Warning]) -> String {
    let mut out = String::new();
    for w in warnings {
        out.push_str(&w.to_string());
        if let Some(p) = w.position {
            out.push_str(&format!(" [position {p}]"));
        }
        out.push_str(&format!(" witness {}", w.witness.deps));
        if let Some(v) = &w.witness.value {
            out.push_str(&format!(" value {v}"));
        }
        out.push('\n');
    }
    out
}
