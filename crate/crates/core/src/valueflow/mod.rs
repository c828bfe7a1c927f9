//! The symvalic fixpoint engine.
//!
//! Inputs are seeded with concrete and symbolic values, and every statement
//! produces inferences `v -> e <dL ; dT>`. Operands are combined pairwise and
//! dropped on dependency conflicts. Conditions are checked with the reasoner,
//! so each branch only sees facts compatible with reaching it. Storage
//! persists across a bounded number of transaction rounds.

mod engine;
mod seed;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use crate::deps::{DependencyBudget, DependencyMap};
use crate::ir::{Contract, StmtId};
use crate::symexpr::Expr;

pub use seed::seed_inputs;

pub const RESULT_SCHEMA: &str = "symvalic-result/1";

/// Precision bounds and resource caps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub budget: DependencyBudget,
    /// Arithmetic operations a stored value may go through before it stops being stored.
    pub arith_depth: u32,
    pub tx_rounds: u32,
    pub seed: u64,
    /// Cap on values a variable may hold at one statement.
    pub max_inferences: usize,
    pub time_budget: Duration,
    /// Replaces the seeds of `(function, parameter)`.
    pub seed_overrides: BTreeMap<(String, String), Vec<Expr>>,
    /// Storage cells set after the constructor runs.
    pub initial_storage: BTreeMap<Expr, Vec<Expr>>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            budget: DependencyBudget::default(),
            arith_depth: 5,
            tx_rounds: 3,
            seed: 0,
            max_inferences: 256,
            time_budget: Duration::from_secs(30),
            seed_overrides: BTreeMap::new(),
            initial_storage: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid analysis configuration: {0}")]
pub struct ConfigError(pub String);

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks = [
            ("dependency argument bound", self.budget.args as u64),
            ("storage-load bound", self.budget.storage_loads as u64),
            ("transaction argument bound", self.budget.tx_args as u64),
            ("arithmetic depth", self.arith_depth as u64),
            ("transaction rounds", self.tx_rounds as u64),
            ("inference cap", self.max_inferences as u64),
        ];
        for (what, v) in checks {
            if v == 0 {
                return Err(ConfigError(format!("{what} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn override_seeds(mut self, function: &str, param: &str, values: Vec<Expr>) -> Self {
        self.seed_overrides.insert((function.to_string(), param.to_string()), values);
        self
    }
}

/// `var` may hold `value` under `deps`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Inference {
    pub function: String,
    pub stmt: StmtId,
    pub var: String,
    pub value: Expr,
    #[serde(flatten)]
    pub deps: DependencyMap,
}

/// Statement `stmt` is reachable under `deps`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReachabilityFact {
    pub function: String,
    pub stmt: StmtId,
    #[serde(flatten)]
    pub deps: DependencyMap,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReturnFact {
    pub function: String,
    pub stmt: StmtId,
    pub value: Expr,
    #[serde(flatten)]
    pub deps: DependencyMap,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ArgValue {
    pub value: Expr,
    #[serde(flatten)]
    pub deps: DependencyMap,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Callee {
    External(String),
    Transfer,
    Selfdestruct,
    Delegatecall,
}

impl Callee {
    /// The external function name, or the intrinsic's mnemonic.
    pub fn signature(&self) -> &str {
        match self {
            Callee::External(s) => s,
            Callee::Transfer => "TRANSFER",
            Callee::Selfdestruct => "SELFDESTRUCT",
            Callee::Delegatecall => "DELEGATECALL",
        }
    }
}

/// Values reaching an external call or sensitive intrinsic, each combined
/// with the reachability dependencies of the call site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallFact {
    pub function: String,
    pub stmt: StmtId,
    pub callee: Callee,
    /// Call target, for external calls.
    pub target: Option<BTreeSet<ArgValue>>,
    pub args: Vec<BTreeSet<ArgValue>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct StoreFact {
    pub function: String,
    pub stmt: StmtId,
    pub address: Expr,
    pub value: Expr,
    #[serde(flatten)]
    pub deps: DependencyMap,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LoadFact {
    pub function: String,
    pub stmt: StmtId,
    pub var: String,
    pub address: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct StoredValue {
    pub value: Expr,
    #[serde(flatten)]
    pub deps: DependencyMap,
    /// Remaining arithmetic operations before the value stops being stored.
    pub depth_budget: u32,
}

/// Normalized storage address to the values it may hold.
pub type StorageState = BTreeMap<Expr, BTreeSet<StoredValue>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigSummary {
    pub budget: DependencyBudget,
    pub arith_depth: u32,
    pub tx_rounds: u32,
    pub seed: u64,
    pub max_inferences: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisResult {
    #[serde(skip)]
    pub contract: Arc<Contract>,
    pub schema: &'static str,
    #[serde(rename = "contract")]
    pub contract_name: String,
    pub config: ConfigSummary,
    pub truncated: bool,
    pub rounds_run: u32,
    pub inferences: BTreeSet<Inference>,
    pub reachability: BTreeSet<ReachabilityFact>,
    pub returns: BTreeSet<ReturnFact>,
    pub calls: Vec<CallFact>,
    pub stores: BTreeSet<StoreFact>,
    pub loads: BTreeSet<LoadFact>,
    #[serde(serialize_with = "serialize_storage")]
    pub storage: StorageState,
}

fn serialize_storage<S: serde::Serializer>(st: &StorageState, s: S) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Cell<'a> {
        address: &'a Expr,
        values: &'a BTreeSet<StoredValue>,
    }
    s.collect_seq(st.iter().map(|(address, values)| Cell { address, values }))
}

/// Whether two storage addresses may name the same cell.
pub fn may_alias(a: &Expr, b: &Expr) -> bool {
    engine::alias(a, b) != engine::Alias::No
}

/// Runs the analysis to its bounded fixpoint.
pub fn analyze(contract: Arc<Contract>, cfg: &AnalysisConfig) -> Result<AnalysisResult, ConfigError> {
    cfg.validate()?;
    Ok(engine::run(contract, cfg))
}

impl AnalysisResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("analysis results serialize")
    }

    /// Inferences for `var`, optionally in `function` and with `value`, whose
    /// dependencies contain every mapping of `pattern`.
    pub fn var_may_be(&self, function: Option<&str>, var: &str, value: Option<&Expr>, pattern: &DependencyMap) -> Vec<&Inference> {
        self.inferences
            .iter()
            .filter(|i| {
                i.var == var && function.is_none_or(|f| i.function == f) && value.is_none_or(|v| &i.value == v) && i.deps.matches(pattern)
            })
            .collect()
    }

    pub fn stmt_reachable(&self, stmt: StmtId, pattern: &DependencyMap) -> Vec<&ReachabilityFact> {
        self.reachability.iter().filter(|r| r.stmt == stmt && r.deps.matches(pattern)).collect()
    }

    /// Distinct values returned by `function`.
    pub fn return_values(&self, function: &str) -> BTreeSet<Expr> {
        self.returns.iter().filter(|r| r.function == function).map(|r| r.value.clone()).collect()
    }

    /// Distinct values inferred for `var` in `function`.
    pub fn values_of(&self, function: &str, var: &str) -> BTreeSet<Expr> {
        self.inferences.iter().filter(|i| i.function == function && i.var == var).map(|i| i.value.clone()).collect()
    }

    pub fn call(&self, stmt: StmtId) -> Option<&CallFact> {
        self.calls.iter().find(|c| c.stmt == stmt)
    }

    /// Human-readable listing of the same facts as the JSON form.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "contract {} ({} rounds{})", self.contract_name, self.rounds_run, if self.truncated { ", truncated" } else { "" });
        for i in &self.inferences {
            let _ = writeln!(out, "{}:{} {} -> {} {}", i.function, i.stmt, i.var, i.value, i.deps);
        }
        for r in &self.reachability {
            let _ = writeln!(out, "{}:{} reachable {}", r.function, r.stmt, r.deps);
        }
        for r in &self.returns {
            let _ = writeln!(out, "{}:{} returns {} {}", r.function, r.stmt, r.value, r.deps);
        }
        for c in &self.calls {
            if let Some(t) = &c.target {
                for v in t {
                    let _ = writeln!(out, "{}:{} call {} target {} {}", c.function, c.stmt, c.callee.signature(), v.value, v.deps);
                }
            }
            for (pos, vals) in c.args.iter().enumerate() {
                for v in vals {
                    let _ = writeln!(out, "{}:{} call {} arg{} {} {}", c.function, c.stmt, c.callee.signature(), pos, v.value, v.deps);
                }
            }
        }
        for s in &self.stores {
            let _ = writeln!(out, "{}:{} store [{}] = {} {}", s.function, s.stmt, s.address, s.value, s.deps);
        }
        for l in &self.loads {
            let _ = writeln!(out, "{}:{} load {} <- [{}]", l.function, l.stmt, l.var, l.address);
        }
        for (addr, vals) in &self.storage {
            for v in vals {
                let _ = writeln!(out, "storage [{}] = {} {} depth {}", addr, v.value, v.deps, v.depth_budget);
            }
        }
        out
    }
}
