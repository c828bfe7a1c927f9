//! Symbolic expressions over 256-bit values and the reasoner built on them.
//!
//! An [`Expr`] is either a concrete constant, a symbolic variable, or a
//! composite built from arithmetic/logical operators, `SHA3` and byte
//! concatenation. The reasoner exposes three predicates, all deliberately
//! incomplete:
//!
//! * [`normalize`] rewrites an expression to a canonical minimal form,
//! * [`implies`] answers `True` only when one constraint provably entails another,
//! * [`value_for_var`] proposes assignments for a free symbol that satisfy a constraint.
//!
//! [`eval_concrete`] is an independent evaluator used to check the three.

mod eval;
mod normalize;
mod reason;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::u256::U256;

pub use eval::{eval_concrete, Assignment, HashOracle};
pub use normalize::{canonical_cmp, is_boolean, normalize};
pub use reason::{implies, value_for_var, Truth};

/// Whether the caller of a transaction may choose a symbol's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binding {
    /// Identity-like values the caller cannot set (`<<owner>>`).
    Bound,
    /// Values the reasoner may concretize to satisfy conditions.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    name: Arc<str>,
    binding: Binding,
}

impl Symbol {
    pub const OWNER: &'static str = "<<owner>>";
    pub const UNPRIVILEGED_USER: &'static str = "<<unprivileged-user>>";
    pub const OWNER_UNIQUE_VALUE: &'static str = "<<owner-unique-value>>";
    pub const USER_UNIQUE_VALUE: &'static str = "<<user-unique-value>>";

    pub fn new(name: impl Into<Arc<str>>, binding: Binding) -> Self {
        Symbol { name: name.into(), binding }
    }

    pub fn bound(name: impl Into<Arc<str>>) -> Self {
        Self::new(name, Binding::Bound)
    }

    pub fn free(name: impl Into<Arc<str>>) -> Self {
        Self::new(name, Binding::Free)
    }

    pub fn owner() -> Self {
        Self::bound(Self::OWNER)
    }

    pub fn unprivileged_user() -> Self {
        Self::bound(Self::UNPRIVILEGED_USER)
    }

    pub fn owner_unique_value() -> Self {
        Self::free(Self::OWNER_UNIQUE_VALUE)
    }

    pub fn user_unique_value() -> Self {
        Self::free(Self::USER_UNIQUE_VALUE)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn binding(&self) -> Binding {
        self.binding
    }

    pub fn is_free(&self) -> bool {
        self.binding == Binding::Free
    }

    /// Resolves a printed name to one of the four distinguished symbols.
    pub fn distinguished(name: &str) -> Option<Self> {
        match name {
            Self::OWNER => Some(Self::owner()),
            Self::UNPRIVILEGED_USER => Some(Self::unprivileged_user()),
            Self::OWNER_UNIQUE_VALUE => Some(Self::owner_unique_value()),
            Self::USER_UNIQUE_VALUE => Some(Self::user_unique_value()),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Gt,
    Eq,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 10] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Mod,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Eq,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "ADD",
            BinOp::Sub => "SUB",
            BinOp::Mul => "MUL",
            BinOp::Div => "DIV",
            BinOp::Mod => "MOD",
            BinOp::Lt => "LT",
            BinOp::Gt => "GT",
            BinOp::Eq => "EQ",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul | BinOp::Eq | BinOp::And | BinOp::Or)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod)
    }

    /// Comparisons and logical connectives always produce 0 or 1.
    pub fn is_boolean(self) -> bool {
        !self.is_arithmetic()
    }

    /// Concrete semantics: unsigned wraparound, `x/0 = x%0 = 0`, booleans as 0/1.
    pub fn apply(self, a: U256, b: U256) -> U256 {
        match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Div => a.evm_div(b),
            BinOp::Mod => a.evm_mod(b),
            BinOp::Lt => U256::from_bool(a < b),
            BinOp::Gt => U256::from_bool(a > b),
            BinOp::Eq => U256::from_bool(a == b),
            BinOp::And => U256::from_bool(!a.is_zero() && !b.is_zero()),
            BinOp::Or => U256::from_bool(!a.is_zero() || !b.is_zero()),
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// A concrete or symbolic 256-bit value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(U256),
    Sym(Symbol),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Sha3(Box<Expr>),
    Concat(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(v: impl Into<U256>) -> Self {
        Expr::Const(v.into())
    }

    pub fn truth(b: bool) -> Self {
        Expr::Const(U256::from_bool(b))
    }

    pub fn sym(s: Symbol) -> Self {
        Expr::Sym(s)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Self {
        Expr::Not(Box::new(a))
    }

    pub fn sha3(a: Expr) -> Self {
        Expr::Sha3(Box::new(a))
    }

    pub fn concat(a: Expr, b: Expr) -> Self {
        Expr::Concat(Box::new(a), Box::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> Self {
        Self::bin(BinOp::Eq, a, b)
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Self::bin(BinOp::And, a, b)
    }

    pub fn owner() -> Self {
        Expr::Sym(Symbol::owner())
    }

    pub fn unprivileged_user() -> Self {
        Expr::Sym(Symbol::unprivileged_user())
    }

    pub fn owner_unique_value() -> Self {
        Expr::Sym(Symbol::owner_unique_value())
    }

    pub fn user_unique_value() -> Self {
        Expr::Sym(Symbol::user_unique_value())
    }

    /// Address of a mapping cell: `SHA3(CONCAT(key, slot))`.
    pub fn mapping_cell(key: Expr, slot: u64) -> Self {
        Self::sha3(Self::concat(key, Expr::constant(slot)))
    }

    pub fn as_const(&self) -> Option<U256> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&Symbol> {
        match self {
            Expr::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    /// A constant that is non-zero, i.e. a definitely-true condition.
    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Const(c) if !c.is_zero())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    /// 0 for constants, 1 for symbols, 2 for composites.
    pub fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Sym(_) => 1,
            _ => 2,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Sym(_) => 1,
            Expr::Not(a) | Expr::Sha3(a) => 1 + a.size(),
            Expr::Bin(_, a, b) | Expr::Concat(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Sym(_) => vec![],
            Expr::Not(a) | Expr::Sha3(a) => vec![a],
            Expr::Bin(_, a, b) | Expr::Concat(a, b) => vec![a, b],
        }
    }

    pub fn contains(&self, needle: &Expr) -> bool {
        self == needle || self.children().into_iter().any(|c| c.contains(needle))
    }

    pub fn contains_sym(&self, name: &str) -> bool {
        match self {
            Expr::Sym(s) => s.name() == name,
            _ => self.children().into_iter().any(|c| c.contains_sym(name)),
        }
    }

    /// All symbols occurring in the expression, in sorted order.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_symbols(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_symbols(&self, out: &mut Vec<Symbol>) {
        match self {
            Expr::Sym(s) => out.push(s.clone()),
            _ => self.children().into_iter().for_each(|c| c.collect_symbols(out)),
        }
    }

    pub fn free_symbols(&self) -> Vec<Symbol> {
        self.symbols().into_iter().filter(Symbol::is_free).collect()
    }

    /// Replaces every occurrence of `sym` with `replacement` (no normalization).
    pub fn substitute(&self, sym: &Symbol, replacement: &Expr) -> Expr {
        match self {
            Expr::Sym(s) if s == sym => replacement.clone(),
            Expr::Const(_) | Expr::Sym(_) => self.clone(),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(sym, replacement), b.substitute(sym, replacement)),
            Expr::Not(a) => Expr::not(a.substitute(sym, replacement)),
            Expr::Sha3(a) => Expr::sha3(a.substitute(sym, replacement)),
            Expr::Concat(a, b) => Expr::concat(a.substitute(sym, replacement), b.substitute(sym, replacement)),
        }
    }
}

impl From<U256> for Expr {
    fn from(v: U256) -> Self {
        Expr::Const(v)
    }
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Self {
        Expr::Sym(s)
    }
}

/// Canonical prefix form, e.g. `SHA3(CONCAT(<<owner>>, 0x0))`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:#x}"),
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Bin(op, a, b) => write!(f, "{op}({a}, {b})"),
            Expr::Not(a) => write!(f, "NOT({a})"),
            Expr::Sha3(a) => write!(f, "SHA3({a})"),
            Expr::Concat(a, b) => write!(f, "CONCAT({a}, {b})"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_expr(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses the canonical printed form back into an [`Expr`].
///
/// Symbols other than the four distinguished ones are read as free if their
/// name is a plain identifier and bound if it is written `<<...>>`.
pub fn parse_expr(text: &str) -> Result<Expr, String> {
    let mut p = ExprParser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(format!("trailing input at offset {}", p.pos));
    }
    Ok(e)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> Result<(), String> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' at offset {}", b as char, self.pos))
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || matches!(self.src[self.pos], b'_' | b'-' | b'.' | b':'))
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn expr(&mut self) -> Result<Expr, String> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(b"<<") {
            let end = self.src[self.pos..]
                .windows(2)
                .position(|w| w == b">>")
                .ok_or("unterminated symbol")?;
            let name = String::from_utf8_lossy(&self.src[self.pos..self.pos + end + 2]).into_owned();
            self.pos += end + 2;
            return Ok(Expr::Sym(Symbol::distinguished(&name).unwrap_or_else(|| Symbol::bound(name))));
        }
        let w = self.word();
        if w.is_empty() {
            return Err(format!("expected expression at offset {}", self.pos));
        }
        if w.as_bytes()[0].is_ascii_digit() {
            return w.parse::<U256>().map(Expr::Const).map_err(|e| e.to_string());
        }
        self.skip_ws();
        if self.src.get(self.pos) != Some(&b'(') {
            return Ok(Expr::Sym(Symbol::free(w)));
        }
        self.eat(b'(')?;
        let first = self.expr()?;
        let e = match w.as_str() {
            "NOT" => Expr::not(first),
            "SHA3" => Expr::sha3(first),
            "CONCAT" => {
                self.eat(b',')?;
                Expr::concat(first, self.expr()?)
            }
            other => {
                let op = BinOp::from_mnemonic(other).ok_or_else(|| format!("unknown operator {other}"))?;
                self.eat(b',')?;
                Expr::bin(op, first, self.expr()?)
            }
        };
        self.eat(b')')?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_print() {
        let e = Expr::mapping_cell(Expr::owner(), 0);
        assert_eq!(e.to_string(), "SHA3(CONCAT(<<owner>>, 0x0))");
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn parse_roundtrip_composite() {
        let e = Expr::bin(
            BinOp::Add,
            Expr::not(Expr::user_unique_value()),
            Expr::bin(BinOp::Mul, Expr::constant(200u64), Expr::sym(Symbol::free("x"))),
        );
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn distinguished_bindings() {
        assert_eq!(Symbol::owner().binding(), Binding::Bound);
        assert_eq!(Symbol::unprivileged_user().binding(), Binding::Bound);
        assert!(Symbol::owner_unique_value().is_free());
        assert!(Symbol::user_unique_value().is_free());
    }
}
