#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use symvalic::deps::{DepKey, DependencyMap};
use symvalic::symexpr::{eval_concrete, implies, normalize, value_for_var, Assignment, BinOp, Expr, HashOracle, Symbol, Truth};
use symvalic::u256::U256;

pub fn fixture_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Copies a fixture corpus into a fresh directory so outputs do not land in the tree.
pub fn corpus_copy(rel: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for item in std::fs::read_dir(fixture_path(rel)).unwrap() {
        let path = item.unwrap().path();
        if path.is_file() {
            std::fs::copy(&path, dir.path().join(path.file_name().unwrap())).unwrap();
        }
    }
    dir
}

pub fn c(v: u64) -> Expr {
    Expr::constant(v)
}

pub fn x() -> Symbol {
    Symbol::free("x")
}

pub fn y() -> Symbol {
    Symbol::free("y")
}

fn arb_u256() -> impl Strategy<Value = U256> {
    prop_oneof![
        6 => (0u64..12).prop_map(U256::from),
        1 => Just(U256::MAX),
        1 => Just(U256::MAX.wrapping_sub(U256::ONE)),
        2 => any::<[u64; 4]>().prop_map(|l| {
            let mut bytes = [0u8; 32];
            for (i, limb) in l.iter().enumerate() {
                bytes[i * 8..i * 8 + 8].copy_from_slice(&limb.to_be_bytes());
            }
            U256::from_be_bytes(bytes)
        }),
    ]
}

fn arb_leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        4 => arb_u256().prop_map(Expr::Const),
        2 => Just(Expr::Sym(x())),
        1 => Just(Expr::Sym(y())),
        1 => Just(Expr::owner()),
        1 => Just(Expr::unprivileged_user()),
        1 => Just(Expr::user_unique_value()),
    ]
}

fn arb_op() -> impl Strategy<Value = BinOp> {
    proptest::sample::select(BinOp::ALL.to_vec())
}

/// Random expressions over two free symbols, the distinguished identities and constants.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            6 => (arb_op(), inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::bin(op, a, b)),
            2 => inner.clone().prop_map(Expr::not),
            1 => inner.clone().prop_map(Expr::sha3),
            1 => (inner.clone(), inner).prop_map(|(a, b)| Expr::concat(a, b)),
        ]
    })
}

/// Comparisons of small terms in `x` and `y` against constants, joined by connectives.
pub fn arb_constraint() -> impl Strategy<Value = Expr> {
    let term = prop_oneof![
        3 => Just(Expr::Sym(x())),
        1 => Just(Expr::Sym(y())),
        1 => (0u64..4).prop_map(|k| Expr::bin(BinOp::Add, Expr::Sym(x()), c(k))),
        1 => (1u64..4).prop_map(|k| Expr::bin(BinOp::Mul, Expr::Sym(x()), c(k))),
    ];
    let atom = (term, proptest::sample::select(vec![BinOp::Lt, BinOp::Gt, BinOp::Eq]), 0u64..10, any::<bool>(), any::<bool>()).prop_map(
        |(t, op, k, flip, negate)| {
            let cmp = if flip { Expr::bin(op, c(k), t) } else { Expr::bin(op, t, c(k)) };
            if negate {
                Expr::not(cmp)
            } else {
                cmp
            }
        },
    );
    atom.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::bin(BinOp::Or, a, b)),
        ]
    })
}

/// A premise and a conclusion that is often one of its parts.
pub fn arb_implication() -> impl Strategy<Value = (Expr, Expr)> {
    prop_oneof![
        (arb_constraint(), arb_constraint()),
        (arb_constraint(), arb_constraint()).prop_map(|(a, b)| (Expr::and(a.clone(), b), a)),
        (arb_constraint(), arb_constraint(), arb_constraint()).prop_map(|(a, b, w)| (Expr::and(a, b), w)),
    ]
}

/// Assignments give distinct values to the two bound identities.
pub fn arb_assignment() -> impl Strategy<Value = Assignment> {
    (arb_u256(), arb_u256(), arb_u256(), arb_u256(), arb_u256()).prop_map(|(vx, vy, owner, user, uuv)| {
        let user = if user == owner { owner.wrapping_add(U256::ONE) } else { user };
        let mut a = BTreeMap::new();
        a.insert("x".to_string(), vx);
        a.insert("y".to_string(), vy);
        a.insert(Symbol::OWNER.to_string(), owner);
        a.insert(Symbol::UNPRIVILEGED_USER.to_string(), user);
        a.insert(Symbol::USER_UNIQUE_VALUE.to_string(), uuv);
        a
    })
}

pub fn eval(e: &Expr, a: &Assignment) -> U256 {
    eval_concrete(e, a, &HashOracle::default()).expect("assignment covers every symbol")
}

pub fn check_idempotent(e: &Expr) -> Result<(), TestCaseError> {
    let once = normalize(e);
    prop_assert_eq!(normalize(&once), once);
    Ok(())
}

pub fn check_preserves_semantics(e: &Expr, a: &Assignment) -> Result<(), TestCaseError> {
    prop_assert_eq!(eval(e, a), eval(&normalize(e), a), "normalized {}", normalize(e));
    Ok(())
}

/// Checks `strong => weak` under every given assignment whenever `implies` claims it.
pub fn check_implies_sound(strong: &Expr, weak: &Expr, assignments: &[Assignment]) -> Result<(), TestCaseError> {
    if implies(strong, weak) == Truth::True {
        for a in assignments {
            if !eval(strong, a).is_zero() {
                prop_assert!(!eval(weak, a).is_zero(), "{} => {} fails under {:?}", strong, weak, a);
            }
        }
    }
    Ok(())
}

pub fn check_value_for_var_sound(constraint: &Expr) -> Result<(), TestCaseError> {
    for cand in value_for_var(&x(), constraint) {
        let got = normalize(&constraint.substitute(&x(), &cand));
        let peeled = matches!(&got, Expr::Bin(BinOp::Eq, a, b) if matches!((a.as_ref(), b.as_ref()), (Expr::Sha3(p), Expr::Sha3(q)) if p == q));
        prop_assert!(got.is_true() || peeled, "x := {} leaves {}", cand, got);
    }
    Ok(())
}

pub fn arb_deps() -> impl Strategy<Value = DependencyMap> {
    let value = (0u64..3).prop_map(c);
    let keys = [DepKey::arg(0, "a"), DepKey::arg(1, "b"), DepKey::load(0, "cur")];
    let sender = prop_oneof![Just(None), Just(Some(Expr::owner())), Just(Some(Expr::unprivileged_user()))];
    (
        proptest::collection::vec(proptest::option::of(value.clone()), 3),
        proptest::option::of(value),
        sender,
    )
        .prop_map(move |(locals, entry, sender)| {
            let mut d = DependencyMap::new();
            for (k, v) in keys.iter().zip(locals) {
                if let Some(v) = v {
                    d.insert_local(k.clone(), &v);
                }
            }
            if let Some(v) = entry {
                d.insert_tx(DepKey::entry_arg(0, "a"), &v);
            }
            match sender {
                Some(s) => d.with_sender(&s),
                None => d,
            }
        })
}

/// A fixed pool of assignments, shared by every implication checked.
pub fn assignment_pool() -> &'static [Assignment] {
    static POOL: std::sync::OnceLock<Vec<Assignment>> = std::sync::OnceLock::new();
    POOL.get_or_init(|| {
        use proptest::strategy::ValueTree;
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        (0..1000).map(|_| arb_assignment().new_tree(&mut runner).unwrap().current()).collect()
    })
}
