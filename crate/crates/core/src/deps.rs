//! Dependency maps `<local ; transaction>` and their combination.
//!
//! An inference `v -> e <dL ; dT>` holds in executions where every variable in
//! `dL` (function arguments, storage-load variables) and `dT` (the sender,
//! transaction entry arguments) holds the mapped value. Combining two maps
//! unions them, or fails when a variable would need two different values.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::ir::Var;
use crate::symexpr::{normalize, Expr, Symbol};

/// A tracked variable. The derived order is the printing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepKey {
    /// `msg.sender` of the transaction.
    Sender,
    /// An argument of the transaction entry point, seen from a callee.
    EntryArg { pos: u32, name: Var },
    /// An argument of the current function.
    Arg { pos: u32, name: Var },
    /// The `ord`-th named variable of the function that loads from storage.
    Load { ord: u32, name: Var },
}

impl DepKey {
    pub fn arg(pos: u32, name: &str) -> Self {
        DepKey::Arg { pos, name: name.into() }
    }

    pub fn entry_arg(pos: u32, name: &str) -> Self {
        DepKey::EntryArg { pos, name: name.into() }
    }

    pub fn load(ord: u32, name: &str) -> Self {
        DepKey::Load { ord, name: name.into() }
    }
}

impl fmt::Display for DepKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepKey::Sender => f.write_str("sender"),
            DepKey::EntryArg { name, .. } => write!(f, "entry.{name}"),
            DepKey::Arg { name, .. } | DepKey::Load { name, .. } => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Local,
    Transaction,
}

/// Two dependency maps disagree on a variable.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("conflicting {scope:?} dependency on `{key}`: {left} vs {right}")]
pub struct Conflict {
    pub key: DepKey,
    pub left: Expr,
    pub right: Expr,
    pub scope: Scope,
}

/// How many variables dependencies are tracked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DependencyBudget {
    /// Leading arguments of the current function kept as local dependencies.
    pub args: u32,
    /// Leading storage-load variables per function kept as local dependencies.
    pub storage_loads: u32,
    /// Leading entry-point arguments kept as transaction dependencies.
    pub tx_args: u32,
}

impl Default for DependencyBudget {
    fn default() -> Self {
        DependencyBudget { args: 3, storage_loads: 1, tx_args: 2 }
    }
}

impl DependencyBudget {
    pub fn keeps(&self, key: &DepKey) -> bool {
        match key {
            DepKey::Sender => true,
            DepKey::EntryArg { pos, .. } => *pos < self.tx_args,
            DepKey::Arg { pos, .. } => *pos < self.args,
            DepKey::Load { ord, .. } => *ord < self.storage_loads,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependencyMap {
    local: BTreeMap<DepKey, Expr>,
    tx: BTreeMap<DepKey, Expr>,
}

fn merge(a: &BTreeMap<DepKey, Expr>, b: &BTreeMap<DepKey, Expr>, scope: Scope) -> Result<BTreeMap<DepKey, Expr>, Conflict> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = large.clone();
    for (k, v) in small {
        match out.get(k) {
            Some(w) if w != v => {
                let (left, right) = if std::ptr::eq(small, a) { (v, w) } else { (w, v) };
                return Err(Conflict { key: k.clone(), left: left.clone(), right: right.clone(), scope });
            }
            Some(_) => {}
            None => {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    Ok(out)
}

impl DependencyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty() && self.tx.is_empty()
    }

    pub fn local(&self) -> &BTreeMap<DepKey, Expr> {
        &self.local
    }

    pub fn tx(&self) -> &BTreeMap<DepKey, Expr> {
        &self.tx
    }

    /// Adds a local mapping, replacing any previous one for `key`.
    pub fn insert_local(&mut self, key: DepKey, value: &Expr) {
        self.local.insert(key, normalize(value));
    }

    /// Adds a transaction mapping, replacing any previous one for `key`.
    pub fn insert_tx(&mut self, key: DepKey, value: &Expr) {
        self.tx.insert(key, normalize(value));
    }

    pub fn with_local(mut self, key: DepKey, value: &Expr) -> Self {
        self.insert_local(key, value);
        self
    }

    pub fn with_tx(mut self, key: DepKey, value: &Expr) -> Self {
        self.insert_tx(key, value);
        self
    }

    pub fn with_sender(self, sender: &Expr) -> Self {
        self.with_tx(DepKey::Sender, sender)
    }

    pub fn sender(&self) -> Option<&Expr> {
        self.tx.get(&DepKey::Sender)
    }

    /// Whether the transaction dependencies pin the sender to `who`.
    pub fn has_sender(&self, who: &Expr) -> bool {
        self.sender() == Some(who)
    }

    /// The compatibility-checked union of two maps.
    pub fn combine(&self, other: &DependencyMap) -> Result<DependencyMap, Conflict> {
        Ok(DependencyMap { local: merge(&self.local, &other.local, Scope::Local)?, tx: merge(&self.tx, &other.tx, Scope::Transaction)? })
    }

    /// Drops the mappings the budget does not track.
    pub fn restrict(&self, budget: &DependencyBudget) -> DependencyMap {
        let keep = |m: &BTreeMap<DepKey, Expr>| m.iter().filter(|(k, _)| budget.keeps(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
        DependencyMap { local: keep(&self.local), tx: keep(&self.tx) }
    }

    /// Only the transaction part.
    pub fn transaction_only(&self) -> DependencyMap {
        DependencyMap { local: BTreeMap::new(), tx: self.tx.clone() }
    }

    /// Removes entry-argument mappings from the transaction part.
    pub fn without_entry_args(mut self) -> DependencyMap {
        self.tx.retain(|k, _| !matches!(k, DepKey::EntryArg { .. }));
        self
    }

    /// Turns tracked local arguments into entry-argument transaction mappings.
    pub fn entry_args_from_locals(&self, budget: &DependencyBudget) -> DependencyMap {
        let mut out = self.transaction_only();
        for (k, v) in &self.local {
            if let DepKey::Arg { pos, name } = k {
                let key = DepKey::EntryArg { pos: *pos, name: name.clone() };
                if budget.keeps(&key) {
                    out.tx.insert(key, v.clone());
                }
            }
        }
        out
    }

    /// Replaces a symbol in every mapped value.
    pub fn substitute(&self, sym: &Symbol, replacement: &Expr) -> DependencyMap {
        let sub = |m: &BTreeMap<DepKey, Expr>| {
            m.iter()
                .map(|(k, v)| {
                    let v = if v.contains_sym(sym.name()) { normalize(&v.substitute(sym, replacement)) } else { v.clone() };
                    (k.clone(), v)
                })
                .collect()
        };
        DependencyMap { local: sub(&self.local), tx: sub(&self.tx) }
    }

    /// Whether every mapping of `pattern` is present here with an equal value.
    pub fn matches(&self, pattern: &DependencyMap) -> bool {
        pattern.local.iter().all(|(k, v)| self.local.get(k) == Some(v)) && pattern.tx.iter().all(|(k, v)| self.tx.get(k) == Some(v))
    }

    pub fn mentions_sym(&self, name: &str) -> bool {
        self.local.values().chain(self.tx.values()).any(|v| v.contains_sym(name))
    }
}

fn write_part(f: &mut fmt::Formatter<'_>, m: &BTreeMap<DepKey, Expr>) -> fmt::Result {
    f.write_str("{")?;
    for (i, (k, v)) in m.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{k} -> {v}")?;
    }
    f.write_str("}")
}

/// `<{to -> 0x42, amount -> 0xc8} ; {sender -> <<owner>>}>`
impl fmt::Display for DependencyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        write_part(f, &self.local)?;
        f.write_str(" ; ")?;
        write_part(f, &self.tx)?;
        f.write_str(">")
    }
}

struct Part<'a>(&'a BTreeMap<DepKey, Expr>);

impl Serialize for Part<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            m.serialize_entry(&k.to_string(), v)?;
        }
        m.end()
    }
}

impl Serialize for DependencyMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DependencyMap", 2)?;
        st.serialize_field("localDeps", &Part(&self.local))?;
        st.serialize_field("txDeps", &Part(&self.tx))?;
        st.end()
    }
}
