//! Corpus analysis: per-function behavior summaries, statistics over many
//! contracts, inferred domain facts, and warnings where a contract departs
//! from what the corpus usually does.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clients::{self, detect_tainted_sensitive_arg, detect_untrusted_reachability, is_tainted, Detection, SensitiveOpSpec, SpecSource, Warning, WarningKind};
use crate::deps::{DepKey, DependencyMap};
use crate::ir::{parse, Function, StmtId};
use crate::symexpr::{Expr, Symbol};
use crate::valueflow::{analyze, may_alias, AnalysisConfig, AnalysisResult, ArgValue, Callee};

pub const FACTS_SCHEMA: &str = "symvalic-facts/1";
pub const DEFAULT_ROUNDS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: malformed facts file: {source}")]
    Facts { path: PathBuf, source: serde_json::Error },
    #[error("refine needs at least one round")]
    NoRounds,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taint {
    Tainted,
    Untainted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalCallSummary {
    pub callee_signature: String,
    pub stmt: StmtId,
    pub guarded: bool,
    pub arg_taint: Vec<Taint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionSummary {
    pub contract: String,
    pub function: String,
    pub public: bool,
    pub reaches_delegatecall: bool,
    pub monetary_arg_positions: BTreeSet<usize>,
    pub performs_init: bool,
    pub manipulable_return: bool,
    /// Calls out to an address the caller supplies.
    pub allows_reentrancy: bool,
    /// Calls a signature the corpus marks as reentrancy-allowing.
    pub transitive_reentrancy: bool,
    pub checked_transfer: bool,
    pub external_calls: Vec<ExternalCallSummary>,
}

fn untrusted() -> DependencyMap {
    DependencyMap::new().with_sender(&Expr::unprivileged_user())
}

fn arg_positions(vals: &BTreeSet<ArgValue>) -> impl Iterator<Item = usize> + '_ {
    vals.iter().flat_map(|a| a.deps.local().keys()).filter_map(|k| match k {
        DepKey::Arg { pos, .. } => Some(*pos as usize),
        _ => None,
    })
}

/// Behavior summaries for every function of an analyzed contract.
pub fn summarize(r: &AnalysisResult, facts: &DomainFacts) -> Vec<FunctionSummary> {
    let owner = Expr::owner();
    let ctor_cells: Vec<&Expr> = r.stores.iter().filter(|s| s.function == Function::CONSTRUCTOR).map(|s| &s.address).collect();
    let untrusted_store = |stmt: StmtId| !r.stmt_reachable(stmt, &untrusted()).is_empty();

    r.contract
        .functions
        .iter()
        .map(|f| {
            let calls: Vec<_> = r.calls.iter().filter(|c| c.function == f.name).collect();
            let only_owner = |stmt: StmtId| {
                let facts: Vec<_> = r.reachability.iter().filter(|x| x.stmt == stmt).collect();
                !facts.is_empty() && facts.iter().all(|x| x.deps.has_sender(&owner))
            };

            let mut external_calls = Vec::new();
            let mut monetary = BTreeSet::new();
            let mut allows_reentrancy = false;
            let mut transitive_reentrancy = false;
            for c in &calls {
                match &c.callee {
                    Callee::External(sig) => {
                        let arg_taint = c.args.iter().map(|vals| if vals.iter().any(is_tainted) { Taint::Tainted } else { Taint::Untainted }).collect();
                        external_calls.push(ExternalCallSummary { callee_signature: sig.clone(), stmt: c.stmt, guarded: only_owner(c.stmt), arg_taint });
                        let target = c.target.iter().flatten();
                        allows_reentrancy |= target.into_iter().any(|t| t.value.contains_sym(Symbol::USER_UNIQUE_VALUE));
                        transitive_reentrancy |= facts.is_reentrancy_allowing(sig);
                        for (pos, vals) in c.args.iter().enumerate() {
                            if facts.monetary.contains_key(&(sig.clone(), pos)) {
                                monetary.extend(arg_positions(vals));
                            }
                        }
                    }
                    Callee::Transfer => monetary.extend(arg_positions(&c.args[1])),
                    _ => {}
                }
            }

            let reaches_delegatecall = calls.iter().any(|c| c.callee == Callee::Delegatecall);
            let transfers: Vec<_> = calls.iter().filter(|c| c.callee == Callee::Transfer).collect();
            let checked_transfer = !transfers.is_empty() && transfers.iter().all(|c| only_owner(c.stmt));

            let performs_init = !f.is_constructor()
                && r.stores.iter().any(|s| s.function == f.name && untrusted_store(s.stmt) && ctor_cells.iter().any(|c| may_alias(c, &s.address)));

            let loaded_vars: BTreeSet<&str> = r
                .returns
                .iter()
                .filter(|x| x.function == f.name)
                .flat_map(|x| x.deps.local().keys())
                .filter_map(|k| match k {
                    DepKey::Load { name, .. } => Some(&**name),
                    _ => None,
                })
                .collect();
            let manipulable_return = r.loads.iter().filter(|l| l.function == f.name && loaded_vars.contains(l.var.as_str())).any(|l| {
                r.stores.iter().any(|s| untrusted_store(s.stmt) && may_alias(&s.address, &l.address))
            });

            FunctionSummary {
                contract: r.contract_name.clone(),
                function: f.name.clone(),
                public: f.is_entry_point(),
                reaches_delegatecall,
                monetary_arg_positions: monetary,
                performs_init,
                manipulable_return,
                allows_reentrancy,
                transitive_reentrancy,
                checked_transfer,
                external_calls,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TaintCounts {
    pub tainted: usize,
    pub untainted: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GuardCounts {
    pub guarded: usize,
    pub unguarded: usize,
}

/// Per-call-site counts over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub args: BTreeMap<(String, usize), TaintCounts>,
    pub callers: BTreeMap<String, GuardCounts>,
    pub reentrancy_votes: BTreeMap<String, usize>,
    pub monetary_votes: BTreeMap<(String, usize), usize>,
}

pub fn aggregate<'a>(summaries: impl IntoIterator<Item = &'a FunctionSummary>) -> CorpusStats {
    let mut st = CorpusStats::default();
    for s in summaries {
        for call in &s.external_calls {
            for (pos, t) in call.arg_taint.iter().enumerate() {
                let c = st.args.entry((call.callee_signature.clone(), pos)).or_default();
                match t {
                    Taint::Tainted => c.tainted += 1,
                    Taint::Untainted => c.untainted += 1,
                }
            }
            let g = st.callers.entry(call.callee_signature.clone()).or_default();
            if call.guarded {
                g.guarded += 1;
            } else {
                g.unguarded += 1;
            }
        }
        if !s.public {
            continue;
        }
        if s.allows_reentrancy {
            *st.reentrancy_votes.entry(s.function.clone()).or_default() += 1;
        }
        for &pos in &s.monetary_arg_positions {
            *st.monetary_votes.entry((s.function.clone(), pos)).or_default() += 1;
        }
    }
    st
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    pub min_samples: usize,
    pub untainted_fraction: f64,
    pub guarded_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { min_samples: 10, untainted_fraction: 0.9, guarded_fraction: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgFact {
    pub signature: String,
    pub position: usize,
    pub tainted: usize,
    pub untainted: usize,
    pub samples: usize,
    pub fraction: f64,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardFact {
    pub signature: String,
    pub guarded: usize,
    pub unguarded: usize,
    pub samples: usize,
    pub fraction: f64,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteFact {
    pub signature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    pub votes: usize,
    pub round: u32,
}

/// What the corpus establishes about external signatures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainFacts {
    /// Arguments that are almost always untainted.
    pub sensitive_args: BTreeMap<(String, usize), ArgFact>,
    pub usually_guarded: BTreeMap<String, GuardFact>,
    pub reentrancy_allowing: BTreeMap<String, VoteFact>,
    /// Arguments that control an amount of funds.
    pub monetary: BTreeMap<(String, usize), VoteFact>,
}

impl DomainFacts {
    pub fn is_reentrancy_allowing(&self, sig: &str) -> bool {
        self.reentrancy_allowing.contains_key(sig)
    }

    pub fn is_monetary(&self, sig: &str) -> bool {
        self.monetary.keys().any(|(s, _)| s == sig)
    }

    pub fn guarded_fact(&self, sig: &str) -> Option<&GuardFact> {
        self.usually_guarded.get(sig)
    }

    pub fn is_empty(&self) -> bool {
        self.sensitive_args.is_empty() && self.usually_guarded.is_empty() && self.reentrancy_allowing.is_empty() && self.monetary.is_empty()
    }

    /// Whether both hold the same facts, ignoring counts.
    pub fn same_facts(&self, other: &DomainFacts) -> bool {
        self.sensitive_args.keys().eq(other.sensitive_args.keys())
            && self.usually_guarded.keys().eq(other.usually_guarded.keys())
            && self.reentrancy_allowing.keys().eq(other.reentrancy_allowing.keys())
            && self.monetary.keys().eq(other.monetary.keys())
    }

    /// Adds facts not already present.
    pub fn absorb(&mut self, newer: DomainFacts) {
        for (k, v) in newer.sensitive_args {
            self.sensitive_args.entry(k).or_insert(v);
        }
        for (k, v) in newer.usually_guarded {
            self.usually_guarded.entry(k).or_insert(v);
        }
        for (k, v) in newer.reentrancy_allowing {
            self.reentrancy_allowing.entry(k).or_insert(v);
        }
        for (k, v) in newer.monetary {
            self.monetary.entry(k).or_insert(v);
        }
    }

    /// The sensitive-argument facts as detector specs, one per signature.
    pub fn sensitive_specs(&self) -> Vec<SensitiveOpSpec> {
        let mut by_sig: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (sig, pos) in self.sensitive_args.keys() {
            by_sig.entry(sig).or_default().insert(*pos);
        }
        by_sig.into_iter().map(|(sig, ps)| SensitiveOpSpec::new(sig, ps, SpecSource::CorpusInferred)).collect()
    }
}

pub fn infer_domain_facts(stats: &CorpusStats, th: &Thresholds, round: u32) -> DomainFacts {
    let mut f = DomainFacts::default();
    for ((sig, pos), c) in &stats.args {
        let samples = c.tainted + c.untainted;
        if samples == 0 || samples < th.min_samples {
            continue;
        }
        let fraction = c.untainted as f64 / samples as f64;
        if fraction >= th.untainted_fraction {
            let fact = ArgFact { signature: sig.clone(), position: *pos, tainted: c.tainted, untainted: c.untainted, samples, fraction, round };
            f.sensitive_args.insert((sig.clone(), *pos), fact);
        }
    }
    for (sig, c) in &stats.callers {
        let samples = c.guarded + c.unguarded;
        if samples == 0 || samples < th.min_samples {
            continue;
        }
        let fraction = c.guarded as f64 / samples as f64;
        if fraction >= th.guarded_fraction {
            let fact = GuardFact { signature: sig.clone(), guarded: c.guarded, unguarded: c.unguarded, samples, fraction, round };
            f.usually_guarded.insert(sig.clone(), fact);
        }
    }
    for (sig, votes) in &stats.reentrancy_votes {
        f.reentrancy_allowing.insert(sig.clone(), VoteFact { signature: sig.clone(), position: None, votes: *votes, round });
    }
    for ((sig, pos), votes) in &stats.monetary_votes {
        f.monetary.insert((sig.clone(), *pos), VoteFact { signature: sig.clone(), position: Some(*pos), votes: *votes, round });
    }
    f
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub facts: DomainFacts,
    /// Facts after each round, in order.
    pub history: Vec<DomainFacts>,
    pub converged: bool,
    pub summaries: Vec<FunctionSummary>,
}

impl RefineOutcome {
    pub fn rounds(&self) -> u32 {
        self.history.len() as u32
    }
}

/// Summarizes, counts and infers until the facts stop changing. Each round
/// re-summarizes with the previous round's facts; facts only grow.
pub fn refine(results: &[&AnalysisResult], th: &Thresholds, rounds: u32) -> Result<RefineOutcome, CorpusError> {
    if rounds == 0 {
        return Err(CorpusError::NoRounds);
    }
    let mut facts = DomainFacts::default();
    let mut history = Vec::new();
    let mut summaries = Vec::new();
    let mut converged = false;
    for round in 1..=rounds {
        summaries = results.par_iter().map(|r| summarize(r, &facts)).flatten().collect();
        let mut next = facts.clone();
        next.absorb(infer_domain_facts(&aggregate(&summaries), th, round));
        converged = next.same_facts(&facts);
        facts = next;
        history.push(facts.clone());
        if converged {
            break;
        }
    }
    Ok(RefineOutcome { facts, history, converged, summaries })
}

/// Corpus-inferred argument and reachability warnings, relabeled as anomalies
/// and annotated with their supporting counts.
pub fn anomalies(r: &AnalysisResult, facts: &DomainFacts) -> Vec<Warning> {
    let mut out = Vec::new();
    for mut w in detect_tainted_sensitive_arg(r, &facts.sensitive_specs()).warnings {
        let fact = &facts.sensitive_args[&(w.signature.clone(), w.position.expect("argument warnings have a position"))];
        w.kind = WarningKind::CorpusAnomaly;
        w.explanation = format!(
            "argument {} of {} is untainted in {} of {} corpus call sites (fraction {}, samples {}) but an unprivileged caller can choose it here",
            fact.position, fact.signature, fact.untainted, fact.samples, fact.fraction, fact.samples
        );
        out.push(w);
    }
    for mut w in detect_untrusted_reachability(r, facts) {
        let fact = &facts.usually_guarded[&w.signature];
        w.kind = WarningKind::CorpusAnomaly;
        w.explanation = format!(
            "{} is guarded in {} of {} corpus call sites (fraction {}, samples {}) but an unprivileged caller reaches it here",
            fact.signature, fact.guarded, fact.samples, fact.fraction, fact.samples
        );
        out.push(w);
    }
    out.sort();
    out
}

/// Every detector plus the anomaly checks, for one contract against corpus facts.
pub fn scan_contract(r: &AnalysisResult, facts: &DomainFacts) -> Detection {
    let mut det = clients::scan(r, facts);
    det.warnings.extend(anomalies(r, facts));
    det.warnings.sort();
    det
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactsFile {
    pub schema: String,
    pub round: u32,
    pub converged: bool,
    pub thresholds: Thresholds,
    pub sensitive_args: Vec<ArgFact>,
    pub usually_guarded: Vec<GuardFact>,
    pub reentrancy_allowing: Vec<VoteFact>,
    pub monetary: Vec<VoteFact>,
}

impl FactsFile {
    pub fn new(facts: &DomainFacts, round: u32, converged: bool, thresholds: Thresholds) -> Self {
        FactsFile {
            schema: FACTS_SCHEMA.to_string(),
            round,
            converged,
            thresholds,
            sensitive_args: facts.sensitive_args.values().cloned().collect(),
            usually_guarded: facts.usually_guarded.values().cloned().collect(),
            reentrancy_allowing: facts.reentrancy_allowing.values().cloned().collect(),
            monetary: facts.monetary.values().cloned().collect(),
        }
    }

    pub fn facts(&self) -> DomainFacts {
        DomainFacts {
            sensitive_args: self.sensitive_args.iter().map(|f| ((f.signature.clone(), f.position), f.clone())).collect(),
            usually_guarded: self.usually_guarded.iter().map(|f| (f.signature.clone(), f.clone())).collect(),
            reentrancy_allowing: self.reentrancy_allowing.iter().map(|f| (f.signature.clone(), f.clone())).collect(),
            monetary: self.monetary.iter().map(|f| ((f.signature.clone(), f.position.unwrap_or_default()), f.clone())).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<FactsFile, CorpusError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text).map_err(|source| CorpusError::Facts { path: path.to_path_buf(), source })
    }

    pub fn from_json(text: &str) -> Result<FactsFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("facts serialize")
    }
}

/// One `.svc` input and what became of it.
#[derive(Debug)]
pub struct Entry {
    pub path: PathBuf,
    pub stem: String,
    pub outcome: Result<AnalysisResult, String>,
}

#[derive(Debug)]
pub struct Corpus {
    pub dir: PathBuf,
    pub entries: Vec<Entry>,
}

impl Corpus {
    pub fn out_dir(&self) -> PathBuf {
        self.dir.join("out")
    }

    pub fn results(&self) -> Vec<&AnalysisResult> {
        self.entries.iter().filter_map(|e| e.outcome.as_ref().ok()).collect()
    }

    /// `path: message` for each input that failed to parse.
    pub fn failures(&self) -> Vec<String> {
        self.entries.iter().filter_map(|e| e.outcome.as_ref().err().map(|m| format!("{}:{m}", e.path.display()))).collect()
    }

    pub fn truncated(&self) -> bool {
        self.results().iter().any(|r| r.truncated)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CorpusError> {
        let out = self.out_dir();
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        let path = out.join(name);
        fs::write(&path, contents).map_err(io_err(&path))
    }

    pub fn write_results(&self) -> Result<(), CorpusError> {
        for e in &self.entries {
            if let Ok(r) = &e.outcome {
                self.write(&format!("{}.result.json", e.stem), &r.to_json())?;
            }
        }
        Ok(())
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CorpusError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CorpusError::Pool(e.to_string()))
}

/// Parses and analyzes every `.svc` file in `dir`, in file-name order.
pub fn load(dir: &Path, cfg: &AnalysisConfig, jobs: usize) -> Result<Corpus, CorpusError> {
    let mut paths = Vec::new();
    for item in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = item.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|x| x == "svc") && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let entries = pool(jobs)?.install(|| {
        paths
            .into_par_iter()
            .map(|path| {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let outcome = fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|text| parse(&text).map_err(|e| e.to_string()))
                    .and_then(|c| analyze(Arc::new(c), cfg).map_err(|e| e.to_string()));
                Entry { path, stem, outcome }
            })
            .collect()
    });
    Ok(Corpus { dir: dir.to_path_buf(), entries })
}

/// Analyzes the corpus and writes results and first-round summaries.
pub fn build(dir: &Path, cfg: &AnalysisConfig, jobs: usize) -> Result<(Corpus, Vec<FunctionSummary>), CorpusError> {
    let corpus = load(dir, cfg, jobs)?;
    corpus.write_results()?;
    let mut all = Vec::new();
    for e in &corpus.entries {
        if let Ok(r) = &e.outcome {
            let s = summarize(r, &DomainFacts::default());
            corpus.write(&format!("{}.summary.json", e.stem), &serde_json::to_string_pretty(&s).expect("summaries serialize"))?;
            all.extend(s);
        }
    }
    Ok((corpus, all))
}

fn facts_files(out: &Path) -> Vec<(u32, PathBuf)> {
    let Ok(items) = fs::read_dir(out) else { return Vec::new() };
    let mut found: Vec<(u32, PathBuf)> = items
        .filter_map(|i| i.ok().map(|i| i.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let n = name.strip_prefix("facts.round-")?.strip_suffix(".json")?.parse().ok()?;
            Some((n, p))
        })
        .collect();
    found.sort();
    found
}

/// Runs [`refine`] over the corpus and writes `facts.round-N.json` per round.
pub fn infer(dir: &Path, cfg: &AnalysisConfig, th: &Thresholds, rounds: u32, jobs: usize) -> Result<(Corpus, RefineOutcome), CorpusError> {
    if rounds == 0 {
        return Err(CorpusError::NoRounds);
    }
    let corpus = load(dir, cfg, jobs)?;
    corpus.write_results()?;
    let outcome = pool(jobs)?.install(|| refine(&corpus.results(), th, rounds))?;
    for (_, stale) in facts_files(&corpus.out_dir()) {
        fs::remove_file(&stale).map_err(io_err(&stale))?;
    }
    let last = outcome.history.len();
    for (i, f) in outcome.history.iter().enumerate() {
        let round = i as u32 + 1;
        let file = FactsFile::new(f, round, outcome.converged && i + 1 == last, *th);
        corpus.write(&format!("facts.round-{round}.json"), &file.to_json())?;
    }
    Ok((corpus, outcome))
}

/// The newest facts file in the corpus output directory.
pub fn newest_facts(dir: &Path) -> Result<Option<FactsFile>, CorpusError> {
    match facts_files(&dir.join("out")).pop() {
        Some((_, p)) => FactsFile::read(&p).map(Some),
        None => Ok(None),
    }
}

/// Anomalies over the whole corpus against its newest facts, inferring them
/// first if none exist.
pub fn scan(dir: &Path, cfg: &AnalysisConfig, th: &Thresholds, jobs: usize) -> Result<(Corpus, Vec<Warning>), CorpusError> {
    let (corpus, facts) = match newest_facts(dir)? {
        Some(file) => {
            let corpus = load(dir, cfg, jobs)?;
            corpus.write_results()?;
            (corpus, file.facts())
        }
        None => {
            let (corpus, outcome) = infer(dir, cfg, th, DEFAULT_ROUNDS, jobs)?;
            (corpus, outcome.facts)
        }
    };
    let mut warnings: Vec<Warning> = corpus.results().iter().flat_map(|r| anomalies(r, &facts)).collect();
    warnings.sort();
    Ok((corpus, warnings))
}
