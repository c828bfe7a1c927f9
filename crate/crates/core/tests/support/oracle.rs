//! Generated contracts with concrete seeds, and a brute-force interpreter for them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigUint;
use proptest::prelude::*;
use symvalic::ir::parse;
use symvalic::symexpr::Expr;
use symvalic::u256::U256;
use symvalic::valueflow::{analyze, AnalysisConfig, AnalysisResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone)]
pub enum Term {
    A,
    B,
    Local(usize),
    Lit(u64),
    Bin(Arith, Box<Term>, Box<Term>),
}

#[derive(Debug, Clone)]
pub enum Cond {
    Cmp(Cmp, Term, Term),
    /// `msg.sender == owner`, or `!=` when false.
    SenderIsOwner(bool),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

#[derive(Debug, Clone)]
pub enum Step {
    Set(usize, Term),
    Require(Cond),
    If(Cond, Vec<Step>, Vec<Step>),
}

pub const LOCALS: usize = 3;

/// `f(uint a, uint b)` of contract `G`, with the seeds each parameter takes.
#[derive(Debug, Clone)]
pub struct Program {
    pub init: Vec<Term>,
    pub body: Vec<Step>,
    pub ret: Term,
    pub a_seeds: Vec<u64>,
    pub b_seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sender {
    Owner,
    Other,
}

fn modulus() -> BigUint {
    BigUint::from(1u8) << 256
}

fn arith(op: Arith, a: &BigUint, b: &BigUint) -> BigUint {
    let m = modulus();
    let zero = BigUint::ZERO;
    match op {
        Arith::Add => (a + b) % &m,
        Arith::Sub => (a + &m - b) % &m,
        Arith::Mul => (a * b) % &m,
        Arith::Div if *b == zero => zero,
        Arith::Div => a / b,
        Arith::Mod if *b == zero => zero,
        Arith::Mod => a % b,
    }
}

struct Frame {
    a: BigUint,
    b: BigUint,
    sender: Sender,
    locals: Vec<BigUint>,
}

impl Frame {
    fn term(&self, t: &Term) -> BigUint {
        match t {
            Term::A => self.a.clone(),
            Term::B => self.b.clone(),
            Term::Local(i) => self.locals[*i].clone(),
            Term::Lit(k) => BigUint::from(*k),
            Term::Bin(op, l, r) => arith(*op, &self.term(l), &self.term(r)),
        }
    }

    fn cond(&self, c: &Cond) -> bool {
        match c {
            Cond::Cmp(op, l, r) => {
                let (l, r) = (self.term(l), self.term(r));
                match op {
                    Cmp::Lt => l < r,
                    Cmp::Gt => l > r,
                    Cmp::Le => l <= r,
                    Cmp::Ge => l >= r,
                    Cmp::Eq => l == r,
                    Cmp::Ne => l != r,
                }
            }
            Cond::SenderIsOwner(want) => (self.sender == Sender::Owner) == *want,
            Cond::Not(c) => !self.cond(c),
            Cond::And(a, b) => self.cond(a) && self.cond(b),
            Cond::Or(a, b) => self.cond(a) || self.cond(b),
        }
    }

    /// `false` when a `require` reverts.
    fn run(&mut self, steps: &[Step]) -> bool {
        for s in steps {
            match s {
                Step::Set(i, t) => self.locals[*i] = self.term(t),
                Step::Require(c) => {
                    if !self.cond(c) {
                        return false;
                    }
                }
                Step::If(c, then_body, else_body) => {
                    let body = if self.cond(c) { then_body } else { else_body };
                    if !self.run(body) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn to_expr(v: &BigUint) -> Expr {
    let mut bytes = [0u8; 32];
    let be = v.to_bytes_be();
    bytes[32 - be.len()..].copy_from_slice(&be);
    Expr::Const(U256::from_be_bytes(bytes))
}

fn seed_value(k: u64) -> BigUint {
    if k == u64::MAX {
        modulus() - 1u8
    } else {
        BigUint::from(k)
    }
}

impl Program {
    /// Return values over every seed and sender combination.
    pub fn interpret(&self) -> BTreeSet<(Sender, Expr)> {
        let mut out = BTreeSet::new();
        for &a in &self.a_seeds {
            for &b in &self.b_seeds {
                for sender in [Sender::Owner, Sender::Other] {
                    let mut frame = Frame { a: seed_value(a), b: seed_value(b), sender, locals: Vec::new() };
                    for t in &self.init {
                        let v = frame.term(t);
                        frame.locals.push(v);
                    }
                    if frame.run(&self.body) {
                        out.insert((sender, to_expr(&frame.term(&self.ret))));
                    }
                }
            }
        }
        out
    }

    pub fn source(&self) -> String {
        let mut s = String::from("contract G {\n    address owner;\n\n    function constructor() public {\n        owner = msg.sender;\n    }\n\n    function f(uint a, uint b) public {\n");
        for (i, t) in self.init.iter().enumerate() {
            let _ = writeln!(s, "        uint t{i} = {};", term_src(t));
        }
        steps_src(&self.body, 2, &mut s);
        let _ = writeln!(s, "        return {};\n    }}\n}}", term_src(&self.ret));
        s
    }

    pub fn config(&self) -> AnalysisConfig {
        let seeds = |v: &[u64]| v.iter().map(|k| to_expr(&seed_value(*k))).collect::<Vec<_>>();
        AnalysisConfig::default().override_seeds("f", "a", seeds(&self.a_seeds)).override_seeds("f", "b", seeds(&self.b_seeds))
    }

    pub fn analyze(&self) -> AnalysisResult {
        let contract = parse(&self.source()).unwrap_or_else(|e| panic!("{e}\n{}", self.source()));
        analyze(Arc::new(contract), &self.config()).unwrap()
    }
}

/// Return values the engine infers for `f`, keyed by sender hypothesis.
pub fn engine_returns(r: &AnalysisResult) -> BTreeSet<(Sender, Expr)> {
    r.returns
        .iter()
        .filter(|f| f.function == "f")
        .map(|f| {
            let sender = if f.deps.has_sender(&Expr::owner()) { Sender::Owner } else { Sender::Other };
            (sender, f.value.clone())
        })
        .collect()
}

fn term_src(t: &Term) -> String {
    match t {
        Term::A => "a".into(),
        Term::B => "b".into(),
        Term::Local(i) => format!("t{i}"),
        Term::Lit(k) => k.to_string(),
        Term::Bin(op, l, r) => {
            let sym = match op {
                Arith::Add => "+",
                Arith::Sub => "-",
                Arith::Mul => "*",
                Arith::Div => "/",
                Arith::Mod => "%",
            };
            format!("({} {sym} {})", term_src(l), term_src(r))
        }
    }
}

fn cond_src(c: &Cond) -> String {
    match c {
        Cond::Cmp(op, l, r) => {
            let sym = match op {
                Cmp::Lt => "<",
                Cmp::Gt => ">",
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "==",
                Cmp::Ne => "!=",
            };
            format!("({} {sym} {})", term_src(l), term_src(r))
        }
        Cond::SenderIsOwner(true) => "(msg.sender == owner)".into(),
        Cond::SenderIsOwner(false) => "(msg.sender != owner)".into(),
        Cond::Not(c) => format!("!{}", cond_src(c)),
        Cond::And(a, b) => format!("({} && {})", cond_src(a), cond_src(b)),
        Cond::Or(a, b) => format!("({} || {})", cond_src(a), cond_src(b)),
    }
}

fn steps_src(steps: &[Step], depth: usize, s: &mut String) {
    let pad = "    ".repeat(depth);
    for step in steps {
        match step {
            Step::Set(i, t) => {
                let _ = writeln!(s, "{pad}t{i} = {};", term_src(t));
            }
            Step::Require(c) => {
                let _ = writeln!(s, "{pad}require({});", cond_src(c));
            }
            Step::If(c, then_body, else_body) => {
                let _ = writeln!(s, "{pad}if ({}) {{", cond_src(c));
                steps_src(then_body, depth + 1, s);
                if else_body.is_empty() {
                    let _ = writeln!(s, "{pad}}}");
                } else {
                    let _ = writeln!(s, "{pad}}} else {{");
                    steps_src(else_body, depth + 1, s);
                    let _ = writeln!(s, "{pad}}}");
                }
            }
        }
    }
}

fn arb_term(locals: usize) -> impl Strategy<Value = Term> {
    let mut leaves = vec![Just(Term::A).boxed(), Just(Term::B).boxed(), (0u64..6).prop_map(Term::Lit).boxed()];
    if locals > 0 {
        leaves.push((0..locals).prop_map(Term::Local).boxed());
    }
    let leaf = proptest::strategy::Union::new(leaves);
    let op = proptest::sample::select(vec![Arith::Add, Arith::Sub, Arith::Mul, Arith::Div, Arith::Mod]);
    leaf.prop_recursive(2, 6, 2, move |inner| (op.clone(), inner.clone(), inner).prop_map(|(op, l, r)| Term::Bin(op, Box::new(l), Box::new(r))))
}

fn arb_cond() -> impl Strategy<Value = Cond> {
    let cmp = proptest::sample::select(vec![Cmp::Lt, Cmp::Gt, Cmp::Le, Cmp::Ge, Cmp::Eq, Cmp::Ne]);
    let atom = prop_oneof![
        4 => (cmp, arb_term(LOCALS), arb_term(LOCALS)).prop_map(|(op, l, r)| Cond::Cmp(op, l, r)),
        1 => any::<bool>().prop_map(Cond::SenderIsOwner),
    ];
    atom.prop_recursive(1, 3, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Cond::Not(Box::new(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Cond::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Cond::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn arb_step() -> impl Strategy<Value = Step> {
    let leaf = prop_oneof![
        4 => ((0..LOCALS), arb_term(LOCALS)).prop_map(|(i, t)| Step::Set(i, t)),
        1 => arb_cond().prop_map(Step::Require),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            2 => inner.clone(),
            1 => (arb_cond(), proptest::collection::vec(inner.clone(), 1..3), proptest::collection::vec(inner, 0..3))
                .prop_map(|(c, t, e)| Step::If(c, t, e)),
        ]
    })
}

fn arb_seeds() -> impl Strategy<Value = Vec<u64>> {
    let pool = vec![0, 1, 2, 3, 4, 5, 7, 8, 10, 16, 100, 255, u64::MAX];
    proptest::sample::subsequence(pool, 1..=4)
}

pub fn arb_program() -> impl Strategy<Value = Program> {
    let init = (arb_term(0), arb_term(1), arb_term(2)).prop_map(|(a, b, c)| vec![a, b, c]);
    (init, proptest::collection::vec(arb_step(), 1..5), arb_term(LOCALS), arb_seeds(), arb_seeds())
        .prop_map(|(init, body, ret, a_seeds, b_seeds)| Program { init, body, ret, a_seeds, b_seeds })
}
