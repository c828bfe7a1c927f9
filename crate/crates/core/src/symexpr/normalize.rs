use std::cmp::Ordering;

use super::{BinOp, Expr};
use crate::u256::U256;

/// Total order used to place operands of commutative operators:
/// constants, then symbols, then composites; ties by printed form.
pub fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    a.rank().cmp(&b.rank()).then_with(|| match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => x.cmp(y),
        (Expr::Sym(x), Expr::Sym(y)) => x.name().cmp(y.name()).then(x.binding().cmp(&y.binding())),
        _ => a.to_string().cmp(&b.to_string()).then_with(|| a.cmp(b)),
    })
}

/// Whether every concrete evaluation of `e` is 0 or 1.
pub fn is_boolean(e: &Expr) -> bool {
    match e {
        Expr::Const(c) => *c <= U256::ONE,
        Expr::Bin(op, _, _) => op.is_boolean(),
        Expr::Not(_) => true,
        _ => false,
    }
}

/// Rewrites `e` to its canonical form.
///
/// The result is equivalent to `e` under every assignment that maps distinct
/// bound symbols to distinct values, with `SHA3`/`CONCAT` treated as injective.
/// Normalization is idempotent and never leaves a binary node with two
/// constant children.
pub fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Sym(_) => e.clone(),
        Expr::Bin(op, a, b) => rewrite_bin(*op, normalize(a), normalize(b)),
        Expr::Not(a) => rewrite_not(normalize(a)),
        Expr::Sha3(a) => Expr::sha3(normalize(a)),
        Expr::Concat(a, b) => rewrite_concat(normalize(a), normalize(b)),
    }
}

fn rewrite_concat(a: Expr, b: Expr) -> Expr {
    // byte concatenation is associative; keep it right-nested
    match a {
        Expr::Concat(x, y) => Expr::concat(*x, rewrite_concat(*y, b)),
        a => Expr::concat(a, b),
    }
}

fn rewrite_not(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::truth(c.is_zero()),
        Expr::Not(inner) if is_boolean(&inner) => *inner,
        a => Expr::not(a),
    }
}

fn is_complement(a: &Expr, b: &Expr) -> bool {
    matches!(b, Expr::Not(x) if **x == *a) || matches!(a, Expr::Not(x) if **x == *b)
}

fn concat_leaves(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Concat(a, b) => {
            let mut v = concat_leaves(a);
            v.extend(concat_leaves(b));
            v
        }
        e => vec![e],
    }
}

/// Equality of two byte images under injectivity of the constructors.
fn eq_images(a: &Expr, b: &Expr) -> Expr {
    let la = concat_leaves(a);
    let lb = concat_leaves(b);
    if la.len() != lb.len() {
        return Expr::truth(false);
    }
    if la.len() == 1 {
        return rewrite_bin(BinOp::Eq, a.clone(), b.clone());
    }
    la.into_iter()
        .zip(lb)
        .map(|(x, y)| rewrite_bin(BinOp::Eq, x.clone(), y.clone()))
        .reduce(|acc, eq| rewrite_bin(BinOp::And, acc, eq))
        .expect("non-empty concat")
}

fn rewrite_bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    use Expr::Const as C;

    if let (C(x), C(y)) = (&a, &b) {
        return C(op.apply(*x, *y));
    }
    if op == BinOp::Gt {
        return rewrite_bin(BinOp::Lt, b, a);
    }
    let (a, b) = if op.is_commutative() && canonical_cmp(&a, &b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    // a bare CONCAT under arithmetic is one hashed word; dropping the operator
    // would let an enclosing CONCAT splice its bytes instead
    if op.is_arithmetic() && (matches!(a, Expr::Concat(..)) || matches!(b, Expr::Concat(..))) {
        return Expr::bin(op, a, b);
    }

    match op {
        BinOp::Add => {
            if a.is_false() {
                return b;
            }
            match (&a, &b) {
                (C(c1), Expr::Bin(BinOp::Add, inner, x)) if inner.is_const() => {
                    let c2 = inner.as_const().unwrap();
                    return rewrite_bin(BinOp::Add, C(c1.wrapping_add(c2)), (**x).clone());
                }
                (C(_), _) => {}
                (Expr::Bin(BinOp::Add, ca, x), Expr::Bin(BinOp::Add, cb, y)) if ca.is_const() && cb.is_const() => {
                    let c = ca.as_const().unwrap().wrapping_add(cb.as_const().unwrap());
                    let rest = rewrite_bin(BinOp::Add, (**x).clone(), (**y).clone());
                    return rewrite_bin(BinOp::Add, C(c), rest);
                }
                (_, Expr::Bin(BinOp::Add, c, x)) | (Expr::Bin(BinOp::Add, c, x), _) if c.is_const() => {
                    let other = if matches!(&a, Expr::Bin(BinOp::Add, c2, _) if c2.is_const()) { &b } else { &a };
                    let rest = rewrite_bin(BinOp::Add, other.clone(), (**x).clone());
                    return rewrite_bin(BinOp::Add, (**c).clone(), rest);
                }
                _ => {}
            }
        }
        BinOp::Sub => {
            if b.is_false() {
                return a;
            }
            if a == b {
                return C(U256::ZERO);
            }
            if let C(c) = b {
                return rewrite_bin(BinOp::Add, C(c.wrapping_neg()), a);
            }
        }
        BinOp::Mul => {
            if a.is_false() {
                return C(U256::ZERO);
            }
            if a == C(U256::ONE) {
                return b;
            }
            if let (C(c1), Expr::Bin(BinOp::Mul, inner, x)) = (&a, &b) {
                if let Some(c2) = inner.as_const() {
                    return rewrite_bin(BinOp::Mul, C(c1.wrapping_mul(c2)), (**x).clone());
                }
            }
        }
        BinOp::Div => {
            if b.is_false() || a.is_false() {
                return C(U256::ZERO);
            }
            if b == C(U256::ONE) {
                return a;
            }
        }
        BinOp::Mod => {
            if b.is_false() || b == C(U256::ONE) || a.is_false() || a == b {
                return C(U256::ZERO);
            }
        }
        BinOp::Lt => {
            if b.is_false() || a == b || a == C(U256::MAX) {
                return Expr::truth(false);
            }
        }
        BinOp::Gt => unreachable!("GT is rewritten to LT"),
        BinOp::Eq => {
            if a == b {
                return Expr::truth(true);
            }
            match (&a, &b) {
                (Expr::Sym(x), Expr::Sym(y)) if !x.is_free() && !y.is_free() => {
                    // distinct bound identities never coincide
                    return Expr::truth(false);
                }
                (Expr::Sha3(x), Expr::Sha3(y)) => return eq_images(x, y),
                (Expr::Concat(..), Expr::Concat(..)) => return eq_images(&a, &b),
                (C(c), x) if is_boolean(x) => {
                    return if *c == U256::ONE {
                        b
                    } else if c.is_zero() {
                        rewrite_not(b)
                    } else {
                        Expr::truth(false)
                    };
                }
                (C(c2), Expr::Bin(BinOp::Add, inner, x)) if inner.is_const() => {
                    let c1 = inner.as_const().unwrap();
                    return rewrite_bin(BinOp::Eq, C(c2.wrapping_sub(c1)), (**x).clone());
                }
                _ => {}
            }
        }
        BinOp::And => {
            if a.is_false() {
                return Expr::truth(false);
            }
            if a.is_true() && is_boolean(&b) {
                return b;
            }
            if a == b && is_boolean(&a) {
                return a;
            }
            if is_complement(&a, &b) {
                return Expr::truth(false);
            }
        }
        BinOp::Or => {
            if a.is_true() {
                return Expr::truth(true);
            }
            if a.is_false() && is_boolean(&b) {
                return b;
            }
            if a == b && is_boolean(&a) {
                return a;
            }
            if is_complement(&a, &b) {
                return Expr::truth(true);
            }
        }
    }
    Expr::bin(op, a, b)
}
