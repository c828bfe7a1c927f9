use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use super::seed::{function_rng, numeric_seeds, param_seeds, sender_hypotheses};
use super::{
    AnalysisConfig, AnalysisResult, ArgValue, CallFact, Callee, ConfigSummary, Inference, LoadFact, ReachabilityFact, ReturnFact,
    StorageState, StoreFact, StoredValue, RESULT_SCHEMA,
};
use crate::deps::{DepKey, DependencyMap};
use crate::ir::{harvest_constants, BlockId, Contract, Function, HarvestedConstants, Op, Operand, Statement, StmtId, Var};
use crate::symexpr::{implies, normalize, value_for_var, BinOp, Expr, Symbol, Truth};

const MAX_CALL_DEPTH: u32 = 4;
/// Operand combinations explored per statement.
const MAX_COMBINATIONS: usize = 1 << 14;

/// A possible value with its dependencies. `budget` counts the arithmetic
/// operations left for values derived from storage; negative once exhausted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Val {
    value: Expr,
    deps: DependencyMap,
    budget: Option<i64>,
}

impl Val {
    fn plain(value: Expr) -> Self {
        Val { value, deps: DependencyMap::new(), budget: None }
    }
}

/// Abstract state before a statement. No reachability facts means the
/// statement cannot execute.
#[derive(Debug, Clone, Default)]
struct State {
    reach: BTreeSet<DependencyMap>,
    env: BTreeMap<Var, BTreeSet<Val>>,
    /// Conditions assumed on the way here.
    path: BTreeSet<Expr>,
}

impl State {
    fn is_bottom(&self) -> bool {
        self.reach.is_empty()
    }

    fn join(states: Vec<State>) -> State {
        let mut it = states.into_iter().filter(|s| !s.is_bottom());
        let Some(mut out) = it.next() else {
            return State::default();
        };
        for s in it {
            out.reach.extend(s.reach);
            for (k, v) in s.env {
                out.env.entry(k).or_default().extend(v);
            }
            out.path = out.path.intersection(&s.path).cloned().collect();
        }
        out
    }

    fn retain_live(&mut self, live: &BTreeSet<Var>) {
        self.env.retain(|k, _| live.contains(k));
    }

    fn path_condition(&self) -> Option<Expr> {
        self.path.iter().cloned().reduce(Expr::and)
    }
}

/// One way through a guard or call: facts compatible with `deps` survive,
/// optionally after substituting a free symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Pass {
    deps: DependencyMap,
    subst: Option<(Symbol, Expr)>,
    assume: Option<Expr>,
    bind: Option<(Var, Val)>,
}

impl Pass {
    fn with(deps: DependencyMap) -> Self {
        Pass { deps, subst: None, assume: None, bind: None }
    }
}

#[derive(Debug, Default)]
struct FnInfo {
    live_in: BTreeMap<BlockId, BTreeSet<Var>>,
    live_after: BTreeMap<StmtId, BTreeSet<Var>>,
    /// Ordinal of each named variable assigned from storage.
    load_ords: BTreeMap<Var, u32>,
}

fn is_temp(v: &str) -> bool {
    v.starts_with('$')
}

fn analyze_function(f: &Function) -> FnInfo {
    let mut info = FnInfo::default();
    let mut order = f.topological_order();
    order.reverse();
    for b in order {
        let block = f.block(b);
        let mut live: BTreeSet<Var> = BTreeSet::new();
        for s in block.terminator().op.successors() {
            live.extend(info.live_in.get(&s).into_iter().flatten().cloned());
        }
        for s in block.stmts.iter().rev() {
            info.live_after.insert(s.id, live.clone());
            if let Some(r) = &s.result {
                live.remove(r);
            }
            live.extend(s.operands.iter().filter_map(|o| match o {
                Operand::Var(v) => Some(v.clone()),
                _ => None,
            }));
        }
        info.live_in.insert(b, live);
    }
    for s in f.statements() {
        if let (Op::Sload, Some(r)) = (&s.op, &s.result) {
            if !is_temp(r) && !info.load_ords.contains_key(r) {
                let n = info.load_ords.len() as u32;
                info.load_ords.insert(r.clone(), n);
            }
        }
    }
    info
}

type Outcome = (BTreeSet<DependencyMap>, Option<BTreeSet<Val>>);

struct Engine<'a> {
    contract: &'a Contract,
    cfg: &'a AnalysisConfig,
    consts: HarvestedConstants,
    info: BTreeMap<String, FnInfo>,
    snapshot: StorageState,
    writes: StorageState,
    inferences: BTreeSet<Inference>,
    reachability: BTreeSet<ReachabilityFact>,
    returns: BTreeSet<ReturnFact>,
    calls: BTreeMap<StmtId, CallFact>,
    stores: BTreeSet<StoreFact>,
    loads: BTreeSet<LoadFact>,
    truncated: bool,
    started: Instant,
}

pub(super) fn run(contract: Arc<Contract>, cfg: &AnalysisConfig) -> AnalysisResult {
    let c: &Contract = &contract;
    let mut e = Engine {
        contract: c,
        cfg,
        consts: harvest_constants(c),
        info: c.functions.iter().map(|f| (f.name.clone(), analyze_function(f))).collect(),
        snapshot: StorageState::new(),
        writes: StorageState::new(),
        inferences: BTreeSet::new(),
        reachability: BTreeSet::new(),
        returns: BTreeSet::new(),
        calls: BTreeMap::new(),
        stores: BTreeSet::new(),
        loads: BTreeSet::new(),
        truncated: false,
        started: Instant::now(),
    };

    let mut storage = StorageState::new();
    if let Some(ctor) = c.constructor() {
        e.run_entry(ctor, &[Expr::owner()].into_iter().collect());
        for (k, vals) in std::mem::take(&mut e.writes) {
            storage.insert(k, vals);
        }
    }
    for (k, vals) in &cfg.initial_storage {
        let vals = vals.iter().map(|v| StoredValue { value: normalize(v), deps: DependencyMap::new(), depth_budget: cfg.arith_depth }).collect();
        storage.insert(normalize(k), vals);
    }

    let senders = sender_hypotheses(&e.consts);
    let mut rounds_run = 0;
    for round in 1..=cfg.tx_rounds {
        e.snapshot = storage.clone();
        for f in c.functions.iter().filter(|f| f.is_entry_point()) {
            e.run_entry(f, &senders);
        }
        for (k, vals) in std::mem::take(&mut e.writes) {
            let cell = storage.entry(k).or_insert_with(|| {
                [StoredValue { value: Expr::constant(0u64), deps: DependencyMap::new(), depth_budget: cfg.arith_depth }].into_iter().collect()
            });
            cell.extend(vals);
            if cell.len() > cfg.max_inferences {
                e.truncated = true;
                *cell = std::mem::take(cell).into_iter().take(cfg.max_inferences).collect();
            }
        }
        rounds_run = round;
        if storage == e.snapshot || e.out_of_time() {
            break;
        }
    }

    AnalysisResult {
        contract: contract.clone(),
        schema: RESULT_SCHEMA,
        contract_name: c.name.clone(),
        config: ConfigSummary {
            budget: cfg.budget,
            arith_depth: cfg.arith_depth,
            tx_rounds: cfg.tx_rounds,
            seed: cfg.seed,
            max_inferences: cfg.max_inferences,
        },
        truncated: e.truncated,
        rounds_run,
        inferences: e.inferences,
        reachability: e.reachability,
        returns: e.returns,
        calls: e.calls.into_values().collect(),
        stores: e.stores,
        loads: e.loads,
        storage,
    }
}

fn vals<'s>(st: &'s State, o: &Operand) -> Cow<'s, BTreeSet<Val>> {
    match o {
        Operand::Var(v) => st.env.get(v).map(Cow::Borrowed).unwrap_or_default(),
        Operand::Lit(c) => Cow::Owned([Val::plain(Expr::Const(*c))].into_iter().collect()),
        Operand::Slot(s) => Cow::Owned([Val::plain(Expr::constant(*s))].into_iter().collect()),
    }
}

fn bin_budget(op: BinOp, a: Option<i64>, b: Option<i64>) -> Option<i64> {
    let m = match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x),
        (Some(x), Some(y)) => Some(x.min(y)),
    };
    if op.is_arithmetic() {
        m.map(|x| x - 1)
    } else {
        m
    }
}

/// Whether an equality is an equality on some free symbol.
fn has_positive_equality(c: &Expr) -> bool {
    match c {
        Expr::Bin(BinOp::Eq, ..) => true,
        Expr::Bin(BinOp::And | BinOp::Or, a, b) => has_positive_equality(a) || has_positive_equality(b),
        _ => false,
    }
}

fn positive_equalities<'e>(c: &'e Expr, out: &mut Vec<&'e Expr>) {
    match c {
        Expr::Bin(BinOp::Eq, ..) => out.push(c),
        Expr::Bin(BinOp::And | BinOp::Or, a, b) => {
            positive_equalities(a, out);
            positive_equalities(b, out);
        }
        _ => {}
    }
}

/// A proposal is accepted only when it makes an equality on `var` hold that
/// did not hold before.
fn accept_proposal(var: &Symbol, cand: &Expr, c: &Expr) -> bool {
    let mut eqs = Vec::new();
    positive_equalities(c, &mut eqs);
    eqs.into_iter().any(|e| e.contains_sym(var.name()) && !e.is_true() && normalize(&e.substitute(var, cand)).is_true())
}

fn substituted(e: &Expr, subst: &Option<(Symbol, Expr)>) -> Expr {
    match subst {
        Some((s, r)) if e.contains_sym(s.name()) => normalize(&e.substitute(s, r)),
        _ => e.clone(),
    }
}

fn substituted_deps(d: &DependencyMap, subst: &Option<(Symbol, Expr)>) -> DependencyMap {
    match subst {
        Some((s, r)) if d.mentions_sym(s.name()) => d.substitute(s, r),
        _ => d.clone(),
    }
}

impl Engine<'_> {
    fn out_of_time(&mut self) -> bool {
        let over = self.started.elapsed() > self.cfg.time_budget;
        self.truncated |= over;
        over
    }

    fn run_entry(&mut self, f: &Function, senders: &BTreeSet<Expr>) {
        let numeric = numeric_seeds(&self.consts, &mut function_rng(self.cfg, &self.contract.name, &f.name));
        let mut st = State::default();
        for s in senders {
            let base = DependencyMap::new().with_sender(s);
            st.reach.insert(base.clone());
            for (i, p) in f.params.iter().enumerate() {
                let key = DepKey::Arg { pos: i as u32, name: p.name.clone() };
                let tracked = self.cfg.budget.keeps(&key);
                for e in param_seeds(self.cfg, &self.consts, f, i, s, &numeric) {
                    let deps = if tracked { base.clone().with_local(key.clone(), &e) } else { base.clone() };
                    st.env.entry(p.name.clone()).or_default().insert(Val { value: e, deps, budget: None });
                }
            }
        }
        self.exec_function(f, st, 0);
    }

    /// Runs `f` from `init` and returns the state at each return.
    fn exec_function(&mut self, f: &Function, init: State, depth: u32) -> Vec<Outcome> {
        let mut incoming: BTreeMap<BlockId, Vec<State>> = BTreeMap::new();
        incoming.insert(f.entry, vec![init]);
        let mut outcomes = Vec::new();
        for b in f.topological_order() {
            let Some(ins) = incoming.remove(&b) else { continue };
            if self.out_of_time() {
                break;
            }
            let mut st = State::join(ins);
            for stmt in &f.block(b).stmts {
                if st.is_bottom() {
                    break;
                }
                st = self.step(f, stmt, st, depth, &mut incoming, &mut outcomes);
            }
        }
        outcomes
    }

    fn live_after(&self, f: &Function, stmt: StmtId) -> &BTreeSet<Var> {
        &self.info[&f.name].live_after[&stmt]
    }

    fn step(
        &mut self,
        f: &Function,
        stmt: &Statement,
        mut st: State,
        depth: u32,
        incoming: &mut BTreeMap<BlockId, Vec<State>>,
        outcomes: &mut Vec<Outcome>,
    ) -> State {
        for r in &st.reach {
            self.reachability.insert(ReachabilityFact { function: f.name.clone(), stmt: stmt.id, deps: r.clone() });
        }
        let ops = &stmt.operands;
        match &stmt.op {
            Op::Const(v) => {
                let out = [Val::plain(Expr::Const(*v))].into_iter().collect();
                self.assign(f, stmt, &mut st, out);
            }
            Op::Move => {
                let out = vals(&st, &ops[0]).into_owned();
                self.assign(f, stmt, &mut st, out);
            }
            Op::Bin(op) => {
                let out = self
                    .product(&st, ops, None)
                    .into_iter()
                    .map(|(vs, deps)| Val {
                        value: normalize(&Expr::bin(*op, vs[0].value.clone(), vs[1].value.clone())),
                        deps,
                        budget: bin_budget(*op, vs[0].budget, vs[1].budget),
                    })
                    .collect();
                self.assign(f, stmt, &mut st, out);
            }
            Op::Not | Op::Sha3 => {
                let wrap = |e: Expr| if matches!(stmt.op, Op::Not) { Expr::not(e) } else { Expr::sha3(e) };
                let out = vals(&st, &ops[0])
                    .iter()
                    .map(|v| Val { value: normalize(&wrap(v.value.clone())), deps: v.deps.clone(), budget: v.budget })
                    .collect();
                self.assign(f, stmt, &mut st, out);
            }
            Op::Concat => {
                let out = self
                    .product(&st, ops, None)
                    .into_iter()
                    .map(|(vs, deps)| Val {
                        value: normalize(&Expr::concat(vs[0].value.clone(), vs[1].value.clone())),
                        deps,
                        budget: vs[0].budget.or(vs[1].budget),
                    })
                    .collect();
                self.assign(f, stmt, &mut st, out);
            }
            Op::Caller => {
                let out = st.reach.iter().filter_map(|r| r.sender()).map(|s| Val { value: s.clone(), deps: DependencyMap::new().with_sender(s), budget: None }).collect();
                self.assign(f, stmt, &mut st, out);
            }
            Op::Sload => {
                let out = self.sload(f, stmt, &st);
                self.assign(f, stmt, &mut st, out);
            }
            Op::Sstore => {
                for (vs, deps) in self.product(&st, ops, None) {
                    let (addr, val) = (&vs[0], &vs[1]);
                    if val.budget.is_some_and(|b| b < 0) {
                        continue;
                    }
                    self.stores.insert(StoreFact {
                        function: f.name.clone(),
                        stmt: stmt.id,
                        address: addr.value.clone(),
                        value: val.value.clone(),
                        deps: deps.clone(),
                    });
                    let stored = StoredValue { value: val.value.clone(), deps, depth_budget: val.budget.map_or(self.cfg.arith_depth, |b| b as u32) };
                    self.writes.entry(addr.value.clone()).or_default().insert(stored);
                }
            }
            Op::Require => {
                let live = self.live_after(f, stmt.id).clone();
                st = self.guard(&st, &ops[0], true, &live);
            }
            Op::Branch { then_block, else_block } => {
                let live = self.live_after(f, stmt.id).clone();
                let then_st = self.guard(&st, &ops[0], true, &live);
                let else_st = self.guard(&st, &ops[0], false, &live);
                self.flow(f, *then_block, then_st, incoming);
                self.flow(f, *else_block, else_st, incoming);
            }
            Op::Jump(b) => {
                self.flow(f, *b, std::mem::take(&mut st), incoming);
            }
            Op::Return => {
                let values = ops.first().map(|o| vals(&st, o).into_owned());
                if let Some(vs) = &values {
                    for v in vs {
                        for r in &st.reach {
                            if let Ok(deps) = v.deps.combine(r) {
                                self.returns.insert(ReturnFact { function: f.name.clone(), stmt: stmt.id, value: v.value.clone(), deps });
                            }
                        }
                    }
                }
                outcomes.push((st.reach.clone(), values));
            }
            Op::CallInternal { callee } => {
                let live = self.live_after(f, stmt.id).clone();
                st = self.call_internal(callee, stmt, &st, depth, &live);
                if let Some(out) = stmt.result.as_ref().and_then(|r| st.env.remove(r)) {
                    self.assign(f, stmt, &mut st, out);
                }
            }
            Op::CallExternal { signature } => self.record_call(f, stmt, &st, Callee::External(signature.clone())),
            Op::Transfer => self.record_call(f, stmt, &st, Callee::Transfer),
            Op::Delegatecall => self.record_call(f, stmt, &st, Callee::Delegatecall),
            Op::Selfdestruct => self.record_call(f, stmt, &st, Callee::Selfdestruct),
        }
        st
    }

    fn flow(&self, f: &Function, to: BlockId, mut st: State, incoming: &mut BTreeMap<BlockId, Vec<State>>) {
        if st.is_bottom() {
            return;
        }
        st.retain_live(&self.info[&f.name].live_in[&to]);
        incoming.entry(to).or_default().push(st);
    }

    fn assign(&mut self, f: &Function, stmt: &Statement, st: &mut State, mut out: BTreeSet<Val>) {
        let Some(var) = &stmt.result else { return };
        if out.len() > self.cfg.max_inferences {
            self.truncated = true;
            out = out.into_iter().take(self.cfg.max_inferences).collect();
        }
        for v in &out {
            self.inferences.insert(Inference {
                function: f.name.clone(),
                stmt: stmt.id,
                var: var.to_string(),
                value: v.value.clone(),
                deps: v.deps.clone(),
            });
        }
        st.env.insert(var.clone(), out);
    }

    /// Compatible combinations of operand values, starting from `base`.
    fn product(&mut self, st: &State, ops: &[Operand], base: Option<&DependencyMap>) -> Vec<(Vec<Val>, DependencyMap)> {
        let mut acc: Vec<(Vec<Val>, DependencyMap)> = vec![(Vec::new(), base.cloned().unwrap_or_default())];
        for o in ops {
            let set = vals(st, o);
            let mut next = Vec::new();
            for (vs, d) in &acc {
                for v in set.iter() {
                    if let Ok(d2) = d.combine(&v.deps) {
                        let mut vs2 = vs.clone();
                        vs2.push(v.clone());
                        next.push((vs2, d2));
                    }
                }
            }
            if next.len() > MAX_COMBINATIONS {
                self.truncated = true;
                next.truncate(MAX_COMBINATIONS);
            }
            acc = next;
        }
        acc
    }

    fn sload(&mut self, f: &Function, stmt: &Statement, st: &State) -> BTreeSet<Val> {
        let var = stmt.result.as_ref().expect("loads have a result");
        let track = self.info[&f.name].load_ords.get(var).copied().map(|ord| DepKey::Load { ord, name: var.clone() }).filter(|k| self.cfg.budget.keeps(k));
        let mut out = BTreeSet::new();
        for a in vals(st, &stmt.operands[0]).iter() {
            self.loads.insert(LoadFact { function: f.name.clone(), stmt: stmt.id, var: var.to_string(), address: a.value.clone() });
            for sv in self.lookup(&a.value) {
                let mut deps = a.deps.clone();
                if let Some(k) = &track {
                    deps.insert_local(k.clone(), &sv.value);
                }
                out.insert(Val { value: sv.value, deps, budget: Some(sv.depth_budget as i64) });
            }
        }
        out
    }

    /// Values a storage address may hold at the start of this round.
    fn lookup(&self, addr: &Expr) -> Vec<StoredValue> {
        let mut out = Vec::new();
        let mut definite = false;
        for (k, set) in &self.snapshot {
            match alias(addr, k) {
                Alias::Must => definite = true,
                Alias::May => {}
                Alias::No => continue,
            }
            out.extend(set.iter().cloned());
        }
        if !definite {
            out.push(StoredValue { value: Expr::constant(0u64), deps: DependencyMap::new(), depth_budget: self.cfg.arith_depth });
        }
        out
    }

    fn guard(&mut self, st: &State, cond: &Operand, positive: bool, live: &BTreeSet<Var>) -> State {
        let pc = st.path_condition();
        let mut passes = BTreeSet::new();
        for cv in vals(st, cond).iter() {
            let c = if positive { normalize(&Expr::not(Expr::not(cv.value.clone()))) } else { normalize(&Expr::not(cv.value.clone())) };
            if c.is_true() {
                passes.insert(Pass::with(cv.deps.clone()));
                continue;
            }
            if c.is_false() {
                continue;
            }
            if let Some(pc) = &pc {
                if implies(pc, &c) == Truth::True {
                    passes.insert(Pass::with(cv.deps.clone()));
                    continue;
                }
                if implies(pc, &Expr::not(c.clone())) == Truth::True {
                    continue;
                }
            }
            let free = c.free_symbols();
            if free.is_empty() {
                continue;
            }
            let mut accepted = false;
            for var in &free {
                for cand in value_for_var(var, &c) {
                    if accept_proposal(var, &cand, &c) {
                        accepted = true;
                        let subst = Some((var.clone(), cand));
                        passes.insert(Pass { deps: substituted_deps(&cv.deps, &subst), subst, assume: None, bind: None });
                    }
                }
            }
            if !accepted && !has_positive_equality(&c) {
                passes.insert(Pass { assume: Some(c), ..Pass::with(cv.deps.clone()) });
            }
        }
        self.apply(st, passes, live)
    }

    /// Unions the passes, keeping only the variables in `live`.
    fn apply(&mut self, st: &State, passes: BTreeSet<Pass>, live: &BTreeSet<Var>) -> State {
        let mut out = State::default();
        let mut assumed: Option<BTreeSet<Expr>> = None;
        for p in passes {
            let reach: BTreeSet<DependencyMap> = st.reach.iter().filter_map(|r| substituted_deps(r, &p.subst).combine(&p.deps).ok()).collect();
            if reach.is_empty() {
                continue;
            }
            out.reach.extend(reach);
            for (var, vs) in st.env.iter().filter(|(v, _)| live.contains(*v)) {
                let slot = out.env.entry(var.clone()).or_default();
                for v in vs {
                    if let Ok(deps) = substituted_deps(&v.deps, &p.subst).combine(&p.deps) {
                        slot.insert(Val { value: substituted(&v.value, &p.subst), deps, budget: v.budget });
                    }
                }
            }
            if let Some((var, val)) = p.bind {
                out.env.entry(var).or_default().insert(val);
            }
            let a: BTreeSet<Expr> = p.assume.into_iter().collect();
            assumed = Some(match assumed {
                None => a,
                Some(prev) => prev.intersection(&a).cloned().collect(),
            });
        }
        if out.is_bottom() {
            return State::default();
        }
        let cap = self.cfg.max_inferences;
        for vs in out.env.values_mut() {
            if vs.len() > cap {
                self.truncated = true;
                *vs = std::mem::take(vs).into_iter().take(cap).collect();
            }
        }
        out.path = st.path.clone();
        out.path.extend(assumed.unwrap_or_default());
        out
    }

    fn call_internal(&mut self, callee: &str, stmt: &Statement, st: &State, depth: u32, live: &BTreeSet<Var>) -> State {
        let g = self.contract.function(callee).expect("lowering resolves callees");
        if depth >= MAX_CALL_DEPTH {
            self.truncated = true;
            return State::default();
        }
        let budget = self.cfg.budget;
        let strip = |d: &DependencyMap| if depth == 0 { d.transaction_only().without_entry_args() } else { d.transaction_only() };
        let mut combos = Vec::new();
        for r in &st.reach {
            for (vs, d) in self.product(st, &stmt.operands, Some(r)) {
                combos.push((vs, d));
            }
        }
        let mut passes = BTreeSet::new();
        for (args, d) in combos {
            let tx = if depth == 0 { d.entry_args_from_locals(&budget) } else { d.transaction_only() };
            let mut init = State::default();
            init.reach.insert(tx.clone());
            for (i, (p, v)) in g.params.iter().zip(&args).enumerate() {
                let key = DepKey::Arg { pos: i as u32, name: p.name.clone() };
                let deps = if budget.keeps(&key) { tx.clone().with_local(key, &v.value) } else { tx.clone() };
                init.env.entry(p.name.clone()).or_default().insert(Val { value: v.value.clone(), deps, budget: v.budget });
            }
            for (reach, values) in self.exec_function(g, init, depth + 1) {
                for rr in &reach {
                    let Ok(p) = d.combine(&strip(rr)) else { continue };
                    match (&stmt.result, &values) {
                        (Some(res), Some(vs)) => {
                            for v in vs {
                                if let Ok(pv) = p.combine(&strip(&v.deps)) {
                                    let val = Val { value: v.value.clone(), deps: pv.clone(), budget: v.budget };
                                    passes.insert(Pass { bind: Some((res.clone(), val)), ..Pass::with(pv) });
                                }
                            }
                        }
                        _ => {
                            passes.insert(Pass::with(p));
                        }
                    }
                }
            }
        }
        self.apply(st, passes, live)
    }

    fn record_call(&mut self, f: &Function, stmt: &Statement, st: &State, callee: Callee) {
        let sets: Vec<BTreeSet<ArgValue>> = stmt
            .operands
            .iter()
            .map(|o| {
                let mut out = BTreeSet::new();
                for v in vals(st, o).iter() {
                    for r in &st.reach {
                        if let Ok(deps) = v.deps.combine(r) {
                            out.insert(ArgValue { value: v.value.clone(), deps });
                        }
                    }
                }
                out
            })
            .collect();
        let (target, args) = match callee {
            Callee::External(_) => {
                let mut it = sets.into_iter();
                (it.next(), it.collect())
            }
            _ => (None, sets),
        };
        let fact = self.calls.entry(stmt.id).or_insert_with(|| CallFact {
            function: f.name.clone(),
            stmt: stmt.id,
            callee,
            target: target.as_ref().map(|_| BTreeSet::new()),
            args: vec![BTreeSet::new(); args.len()],
        });
        if let (Some(acc), Some(t)) = (&mut fact.target, target) {
            acc.extend(t);
        }
        for (acc, a) in fact.args.iter_mut().zip(args) {
            acc.extend(a);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Alias {
    Must,
    May,
    No,
}

/// Two storage addresses alias when they are equal, and may alias when a
/// free symbol can be chosen to make them equal.
pub(super) fn alias(a: &Expr, b: &Expr) -> Alias {
    if a == b {
        return Alias::Must;
    }
    let eq = normalize(&Expr::eq(a.clone(), b.clone()));
    if eq.is_true() {
        Alias::Must
    } else if !eq.is_false() && eq.free_symbols().iter().any(|v| !value_for_var(v, &eq).is_empty()) {
        Alias::May
    } else {
        Alias::No
    }
}
