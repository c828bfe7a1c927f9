use super::normalize::{is_boolean, normalize};
use super::{BinOp, Expr, Symbol};
use crate::u256::U256;

/// Outcome of [`implies`]: either a proof or no answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    Unknown,
}

const MAX_CASE_SPLITS: u32 = 4;

/// Checks whether `strong` entails `weak` for every assignment.
///
/// Syntactic and cheap: normalization, conjunct subsumption, substitution of
/// symbols pinned by an equality, case splits on disjunctions, and interval
/// reasoning on comparisons of one term against constants.
pub fn implies(strong: &Expr, weak: &Expr) -> Truth {
    if entails(&normalize(strong), &normalize(weak), MAX_CASE_SPLITS) {
        Truth::True
    } else {
        Truth::Unknown
    }
}

fn conjuncts(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Bin(BinOp::And, a, b) if is_boolean(a) && is_boolean(b) => {
            let mut v = conjuncts(a);
            v.extend(conjuncts(b));
            v
        }
        e => vec![e.clone()],
    }
}

fn entails(strong: &Expr, weak: &Expr, splits: u32) -> bool {
    if weak.is_true() || strong.is_false() || strong == weak {
        return true;
    }
    let facts = conjuncts(strong);
    if splits > 0 {
        if let Some(i) = facts.iter().position(|f| matches!(f, Expr::Bin(BinOp::Or, a, b) if is_boolean(a) && is_boolean(b))) {
            let Expr::Bin(BinOp::Or, p, q) = &facts[i] else { unreachable!() };
            let rest: Vec<Expr> = facts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.clone()).collect();
            let with = |extra: &Expr| {
                rest.iter().cloned().fold(extra.clone(), Expr::and)
            };
            return entails(&normalize(&with(p)), weak, splits - 1) && entails(&normalize(&with(q)), weak, splits - 1);
        }
    }
    if facts_contradict(&facts) {
        return true;
    }
    conjuncts(weak).iter().all(|atom| atom_entailed(&facts, atom))
}

fn atom_entailed(facts: &[Expr], atom: &Expr) -> bool {
    if atom.is_true() || facts.contains(atom) {
        return true;
    }
    if let Expr::Bin(BinOp::Or, p, q) = atom {
        if atom_entailed(facts, p) || atom_entailed(facts, q) {
            return true;
        }
    }
    // a fact pinning a symbol to a value lets us substitute it
    for fact in facts {
        if let Expr::Bin(BinOp::Eq, l, r) = fact {
            for (side, other) in [(l, r), (r, l)] {
                if let Expr::Sym(s) = side.as_ref() {
                    if !other.contains(side) {
                        let rewritten = normalize(&atom.substitute(s, other));
                        if rewritten.is_true() {
                            return true;
                        }
                    }
                }
            }
        }
    }
    if let Some((term, req)) = requirement(atom) {
        let known = facts
            .iter()
            .filter_map(interval_of)
            .filter(|(t, _)| *t == term)
            .fold(Interval::FULL, |acc, (_, iv)| acc.intersect(iv));
        return req.holds_on(known);
    }
    false
}

fn facts_contradict(facts: &[Expr]) -> bool {
    if facts.iter().any(Expr::is_false) {
        return true;
    }
    let bounds: Vec<(Expr, Interval)> = facts.iter().filter_map(interval_of).collect();
    bounds.iter().any(|(t, _)| {
        bounds.iter().filter(|(u, _)| u == t).fold(Interval::FULL, |acc, (_, iv)| acc.intersect(*iv)).is_empty()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Interval {
    lo: U256,
    hi: U256,
}

impl Interval {
    const FULL: Interval = Interval { lo: U256::ZERO, hi: U256::MAX };
    const EMPTY: Interval = Interval { lo: U256::MAX, hi: U256::ZERO };

    fn new(lo: U256, hi: U256) -> Self {
        Interval { lo, hi }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    fn intersect(self, other: Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.min(other.hi) }
    }

    fn contains(&self, v: U256) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// What an atom demands of a single term.
enum Requirement {
    Within(Interval),
    Not(U256),
}

impl Requirement {
    fn holds_on(&self, known: Interval) -> bool {
        if known.is_empty() {
            return true;
        }
        match self {
            Requirement::Within(iv) => iv.lo <= known.lo && known.hi <= iv.hi,
            Requirement::Not(v) => !known.contains(*v),
        }
    }
}

/// The constraint `fact` places on one non-constant term, as an interval.
fn interval_of(fact: &Expr) -> Option<(Expr, Interval)> {
    match requirement(fact)? {
        (t, Requirement::Within(iv)) => Some((t, iv)),
        (_, Requirement::Not(_)) => None,
    }
}

fn requirement(atom: &Expr) -> Option<(Expr, Requirement)> {
    use Requirement::*;
    Some(match atom {
        Expr::Bin(BinOp::Eq, c, t) if c.is_const() && !t.is_const() => {
            let v = c.as_const().unwrap();
            (t.as_ref().clone(), Within(Interval::new(v, v)))
        }
        Expr::Bin(BinOp::Lt, t, c) if c.is_const() && !t.is_const() => {
            let v = c.as_const().unwrap();
            let iv = if v.is_zero() { Interval::EMPTY } else { Interval::new(U256::ZERO, v.wrapping_sub(U256::ONE)) };
            (t.as_ref().clone(), Within(iv))
        }
        Expr::Bin(BinOp::Lt, c, t) if c.is_const() && !t.is_const() => {
            let v = c.as_const().unwrap();
            let iv = if v == U256::MAX { Interval::EMPTY } else { Interval::new(v.wrapping_add(U256::ONE), U256::MAX) };
            (t.as_ref().clone(), Within(iv))
        }
        Expr::Not(inner) => match inner.as_ref() {
            Expr::Bin(BinOp::Lt, t, c) if c.is_const() && !t.is_const() => {
                (t.as_ref().clone(), Within(Interval::new(c.as_const().unwrap(), U256::MAX)))
            }
            Expr::Bin(BinOp::Lt, c, t) if c.is_const() && !t.is_const() => {
                (t.as_ref().clone(), Within(Interval::new(U256::ZERO, c.as_const().unwrap())))
            }
            Expr::Bin(BinOp::Eq, c, t) if c.is_const() && !t.is_const() => {
                (t.as_ref().clone(), Not(c.as_const().unwrap()))
            }
            t if !is_boolean(t) && !t.is_const() => (t.clone(), Within(Interval::new(U256::ZERO, U256::ZERO))),
            _ => return None,
        },
        t if !is_boolean(t) && !t.is_const() => (t.clone(), Within(Interval::new(U256::ONE, U256::MAX))),
        _ => return None,
    })
}

/// Proposes values for the free symbol `var` under which `constraint` holds.
///
/// Equalities are mined first (`var == e` proposes `e`), then boundary values
/// of single-symbol comparisons. Every returned candidate makes the
/// substituted constraint normalize to true. Bound symbols get no proposals.
pub fn value_for_var(var: &Symbol, constraint: &Expr) -> Vec<Expr> {
    if !var.is_free() {
        return Vec::new();
    }
    let c = normalize(constraint);
    let target = Expr::Sym(var.clone());
    let mut candidates = Vec::new();
    collect_equalities(&c, &target, &mut candidates);
    collect_boundaries(&c, &target, &mut candidates);

    let mut out: Vec<Expr> = Vec::new();
    for cand in candidates {
        if out.contains(&cand) {
            continue;
        }
        if normalize(&c.substitute(var, &cand)).is_true() {
            out.push(cand);
        }
    }
    out
}

fn collect_equalities(c: &Expr, target: &Expr, out: &mut Vec<Expr>) {
    match c {
        Expr::Bin(BinOp::Eq, a, b) => {
            if **a == *target && !b.contains(target) {
                out.push(normalize(b));
            } else if **b == *target && !a.contains(target) {
                out.push(normalize(a));
            }
        }
        Expr::Bin(BinOp::And | BinOp::Or, a, b) => {
            collect_equalities(a, target, out);
            collect_equalities(b, target, out);
        }
        _ => {}
    }
}

fn collect_boundaries(c: &Expr, target: &Expr, out: &mut Vec<Expr>) {
    let one = U256::ONE;
    match c {
        Expr::Bin(BinOp::Lt, a, b) if **a == *target => {
            if let Some(k) = b.as_const().filter(|k| !k.is_zero()) {
                out.push(Expr::Const(k.wrapping_sub(one)));
            }
        }
        Expr::Bin(BinOp::Lt, a, b) if **b == *target => {
            if let Some(k) = a.as_const().filter(|k| *k != U256::MAX) {
                out.push(Expr::Const(k.wrapping_add(one)));
            }
        }
        Expr::Not(inner) => match inner.as_ref() {
            Expr::Bin(BinOp::Eq, k, t) if **t == *target && k.is_const() => {
                out.push(Expr::Const(k.as_const().unwrap().wrapping_add(one)));
            }
            Expr::Bin(BinOp::Lt, t, k) | Expr::Bin(BinOp::Lt, k, t) if **t == *target && k.is_const() => {
                out.push(Expr::Const(k.as_const().unwrap()));
            }
            t if *t == *target => out.push(Expr::Const(U256::ZERO)),
            _ => {}
        },
        Expr::Bin(BinOp::And | BinOp::Or, a, b) => {
            collect_boundaries(a, target, out);
            collect_boundaries(b, target, out);
        }
        t if *t == *target => out.push(Expr::Const(one)),
        _ => {}
    }
}
