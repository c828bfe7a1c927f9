//! Contract intermediate representation.
//!
//! Contracts are written in a small Solidity-like surface language (`.svc`
//! files) and lowered to three-address statements grouped in basic blocks.
//! Mapping accesses `m[k]` become `SLOAD(SHA3(CONCAT(k, slot)))`, and
//! `msg.sender` becomes a `CALLER` statement.

pub mod ast;
mod lower;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::symexpr::BinOp;
use crate::u256::U256;

pub use parse::parse_ast;

/// Variable name. Compiler temporaries are spelled `$tN`.
pub type Var = Arc<str>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u32);

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Uint256,
    Address,
    Bool,
}

impl ValueType {
    pub fn is_numeric(self) -> bool {
        !matches!(self, ValueType::Bool)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Uint256 => "uint256",
            ValueType::Address => "address",
            ValueType::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Scalar(ValueType),
    Mapping,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StorageDecl {
    pub name: String,
    pub slot: u64,
    pub kind: StorageKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: Var,
    pub ty: ValueType,
}

/// A statement operand.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Var(Var),
    Lit(U256),
    /// A storage slot offset; not a program literal.
    Slot(u64),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => f.write_str(v),
            Operand::Lit(c) => write!(f, "{c:#x}"),
            Operand::Slot(s) => write!(f, "slot({s})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Const(U256),
    /// Copies its single operand.
    Move,
    Bin(BinOp),
    Not,
    Sha3,
    Concat,
    Sload,
    /// Operands: address, value.
    Sstore,
    Require,
    Branch { then_block: BlockId, else_block: BlockId },
    Jump(BlockId),
    CallInternal { callee: String },
    /// Operands: target address, then the call arguments.
    CallExternal { signature: String },
    /// Operands: recipient, amount.
    Transfer,
    Selfdestruct,
    Delegatecall,
    Caller,
    Return,
}

impl Op {
    pub fn mnemonic(&self) -> &str {
        match self {
            Op::Const(_) => "CONST",
            Op::Move => "MOVE",
            Op::Bin(op) => op.mnemonic(),
            Op::Not => "NOT",
            Op::Sha3 => "SHA3",
            Op::Concat => "CONCAT",
            Op::Sload => "SLOAD",
            Op::Sstore => "SSTORE",
            Op::Require => "REQUIRE",
            Op::Branch { .. } => "BRANCH",
            Op::Jump(_) => "JUMP",
            Op::CallInternal { .. } => "CALLINTERNAL",
            Op::CallExternal { .. } => "CALLEXTERNAL",
            Op::Transfer => "TRANSFER",
            Op::Selfdestruct => "SELFDESTRUCT",
            Op::Delegatecall => "DELEGATECALL",
            Op::Caller => "CALLER",
            Op::Return => "RETURN",
        }
    }

    pub fn is_terminator(&self) -> bool {
        matches!(self, Op::Branch { .. } | Op::Jump(_) | Op::Return | Op::Selfdestruct)
    }

    /// Transfer, selfdestruct and delegatecall.
    pub fn is_sensitive_intrinsic(&self) -> bool {
        matches!(self, Op::Transfer | Op::Selfdestruct | Op::Delegatecall)
    }

    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Op::Branch { then_block, else_block } => vec![*then_block, *else_block],
            Op::Jump(b) => vec![*b],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Statement {
    pub id: StmtId,
    pub op: Op,
    pub operands: Vec<Operand>,
    pub result: Option<Var>,
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.id)?;
        if let Some(r) = &self.result {
            write!(f, "{r} = ")?;
        }
        f.write_str(self.op.mnemonic())?;
        match &self.op {
            Op::Const(c) => write!(f, " {c:#x}")?,
            Op::CallInternal { callee } => write!(f, " {callee}")?,
            Op::CallExternal { signature } => write!(f, " {signature}")?,
            _ => {}
        }
        for (i, o) in self.operands.iter().enumerate() {
            write!(f, "{}{o}", if i == 0 { " " } else { ", " })?;
        }
        match &self.op {
            Op::Branch { then_block, else_block } => write!(f, " ? {then_block} : {else_block}"),
            Op::Jump(b) => write!(f, " {b}"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasicBlock {
    pub id: BlockId,
    pub stmts: Vec<Statement>,
}

impl BasicBlock {
    pub fn terminator(&self) -> &Statement {
        self.stmts.last().expect("blocks are never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Function {
    pub name: String,
    pub visibility: Visibility,
    pub params: Vec<Param>,
    pub blocks: Vec<BasicBlock>,
    pub entry: BlockId,
}

impl Function {
    pub const CONSTRUCTOR: &'static str = "constructor";

    pub fn is_constructor(&self) -> bool {
        self.name == Self::CONSTRUCTOR
    }

    /// Public non-constructor functions start transactions.
    pub fn is_entry_point(&self) -> bool {
        self.visibility == Visibility::Public && !self.is_constructor()
    }

    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.0 as usize]
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.blocks.iter().flat_map(|b| b.stmts.iter())
    }

    pub fn statement(&self, id: StmtId) -> Option<&Statement> {
        self.statements().find(|s| s.id == id)
    }

    pub fn predecessors(&self) -> BTreeMap<BlockId, Vec<BlockId>> {
        let mut preds: BTreeMap<BlockId, Vec<BlockId>> = self.blocks.iter().map(|b| (b.id, vec![])).collect();
        for b in &self.blocks {
            for s in b.terminator().op.successors() {
                preds.entry(s).or_default().push(b.id);
            }
        }
        preds
    }

    /// Blocks in an order where every block follows its predecessors.
    pub fn topological_order(&self) -> Vec<BlockId> {
        let preds = self.predecessors();
        let mut indegree: BTreeMap<BlockId, usize> = preds.iter().map(|(b, p)| (*b, p.len())).collect();
        let mut ready: Vec<BlockId> = vec![self.entry];
        let mut order = Vec::with_capacity(self.blocks.len());
        while let Some(b) = ready.pop() {
            order.push(b);
            for s in self.block(b).terminator().op.successors().into_iter().rev() {
                let d = indegree.get_mut(&s).expect("successor exists");
                *d -= 1;
                if *d == 0 {
                    ready.push(s);
                }
            }
        }
        order
    }

    /// Statements reachable in the CFG strictly after `from`.
    pub fn reachable_after(&self, from: StmtId) -> BTreeSet<StmtId> {
        let mut out = BTreeSet::new();
        let Some(home) = self.blocks.iter().find(|b| b.stmts.iter().any(|s| s.id == from)) else {
            return out;
        };
        let pos = home.stmts.iter().position(|s| s.id == from).unwrap();
        out.extend(home.stmts[pos + 1..].iter().map(|s| s.id));
        let mut seen = BTreeSet::new();
        let mut work = home.terminator().op.successors();
        while let Some(b) = work.pop() {
            if seen.insert(b) {
                let block = self.block(b);
                out.extend(block.stmts.iter().map(|s| s.id));
                work.extend(block.terminator().op.successors());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub name: String,
    pub storage: Vec<StorageDecl>,
    pub functions: Vec<Function>,
    /// Literals below 2^160 used where an address is expected.
    pub address_constants: BTreeSet<U256>,
}

impl Contract {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn constructor(&self) -> Option<&Function> {
        self.function(Function::CONSTRUCTOR)
    }

    pub fn storage_decl(&self, name: &str) -> Option<&StorageDecl> {
        self.storage.iter().find(|d| d.name == name)
    }

    /// Locates a statement by id.
    pub fn find_statement(&self, id: StmtId) -> Option<(&Function, &Statement)> {
        self.functions.iter().find_map(|f| f.statement(id).map(|s| (f, s)))
    }

    /// Panics if a structural invariant is violated.
    pub fn assert_well_formed(&self) {
        for (i, d) in self.storage.iter().enumerate() {
            assert_eq!(d.slot, i as u64, "storage slots are consecutive");
        }
        let names: BTreeSet<&str> = self.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names.len(), self.functions.len(), "function names are unique");
        let mut ids = BTreeSet::new();
        for f in &self.functions {
            for (i, b) in f.blocks.iter().enumerate() {
                assert_eq!(b.id.0 as usize, i);
                assert!(b.terminator().op.is_terminator(), "{}:{} lacks a terminator", f.name, b.id);
                for s in &b.stmts[..b.stmts.len() - 1] {
                    assert!(!s.op.is_terminator(), "terminator {} inside {}", s, b.id);
                }
                for s in &b.stmts {
                    assert!(ids.insert(s.id), "duplicate statement id {}", s.id);
                }
            }
            assert_eq!(f.topological_order().len(), f.blocks.len(), "{} has an unreachable block or a cycle", f.name);
        }
    }
}

/// Literals harvested from a contract's statements.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestedConstants {
    pub numeric: BTreeSet<U256>,
    pub address_like: BTreeSet<U256>,
}

/// Collects every literal in the statements; slot offsets are not literals.
pub fn harvest_constants(c: &Contract) -> HarvestedConstants {
    let mut numeric = BTreeSet::new();
    for s in c.functions.iter().flat_map(Function::statements) {
        if let Op::Const(v) = s.op {
            numeric.insert(v);
        }
        numeric.extend(s.operands.iter().filter_map(|o| match o {
            Operand::Lit(v) => Some(*v),
            _ => None,
        }));
    }
    HarvestedConstants { numeric, address_like: c.address_constants.clone() }
}

/// Parses and lowers surface source text.
pub fn parse(text: &str) -> Result<Contract, ParseError> {
    let ast = parse_ast(text)?;
    let contract = lower::lower(&ast)?;
    contract.assert_well_formed();
    Ok(contract)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undeclared name `{0}`")]
    Undeclared(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("{0}")]
    Invalid(String),
}

impl ParseError {
    pub fn new(pos: ast::Pos, kind: ParseErrorKind) -> Self {
        ParseError { line: pos.line, column: pos.column, kind }
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        let vis = match self.visibility {
            Visibility::Public => "public",
            Visibility::Internal => "internal",
        };
        writeln!(f, "function {}({}) {vis} entry {}", self.name, params.join(", "), self.entry)?;
        for b in &self.blocks {
            writeln!(f, "  {}:", b.id)?;
            for s in &b.stmts {
                writeln!(f, "    {s}")?;
            }
        }
        Ok(())
    }
}

/// Lowered form listing, for diagnostics.
impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "contract {}", self.name)?;
        for d in &self.storage {
            let kind = match d.kind {
                StorageKind::Scalar(t) => t.to_string(),
                StorageKind::Mapping => "mapping".to_string(),
            };
            writeln!(f, "  slot {} {kind} {}", d.slot, d.name)?;
        }
        for func in &self.functions {
            write!(f, "{func}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAFE: &str = "contract Safe {
        address owner;
        mapping balanceOf;
        function constructor() public { owner = msg.sender; }
        function deposit(address to, uint amount) public {
            require(msg.sender == owner);
            uint curBalance = balanceOf[to];
            uint nextBalance = curBalance + amount * 90 / 100;
            balanceOf[to] = nextBalance;
        }
    }";

    fn ops(f: &Function) -> Vec<String> {
        f.statements().map(|s| s.op.mnemonic().to_string()).collect()
    }

    #[test]
    fn require_sender_is_owner() {
        let c = parse(SAFE).unwrap();
        let f = c.function("deposit").unwrap();
        assert_eq!(&ops(f)[..4], ["CALLER", "SLOAD", "EQ", "REQUIRE"]);
        let stmts: Vec<&Statement> = f.statements().collect();
        assert_eq!(stmts[1].operands, vec![Operand::Slot(0)]);
        assert_eq!(stmts[2].operands, vec![Operand::Var(stmts[0].result.clone().unwrap()), Operand::Var(stmts[1].result.clone().unwrap())]);
    }

    #[test]
    fn mapping_store_lowering() {
        let c = parse("contract C { address a; mapping balanceOf; function f(address to, uint v) public { balanceOf[to] = v; } }").unwrap();
        let f = c.function("f").unwrap();
        assert_eq!(ops(f), ["CONCAT", "SHA3", "SSTORE", "RETURN"]);
        let stmts: Vec<&Statement> = f.statements().collect();
        assert_eq!(stmts[0].operands, vec![Operand::Var("to".into()), Operand::Slot(1)]);
        assert_eq!(stmts[2].operands[1], Operand::Var("v".into()));
    }

    #[test]
    fn empty_body_is_single_return() {
        let c = parse("contract C { function f() public { } }").unwrap();
        let f = c.function("f").unwrap();
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(ops(f), ["RETURN"]);
    }

    #[test]
    fn harvest_safe_constants() {
        let c = parse(SAFE).unwrap();
        let h = harvest_constants(&c);
        assert_eq!(h.numeric, BTreeSet::from([U256::from_u64(90), U256::from_u64(100)]));
        assert!(h.address_like.is_empty());
    }

    #[test]
    fn harvest_address_position() {
        let c = parse("contract C { function f(uint a) public { uint x = a + 90; transfer(0x42, 100); } }").unwrap();
        let h = harvest_constants(&c);
        assert_eq!(h.numeric, [90u64, 100, 0x42].into_iter().map(U256::from_u64).collect());
        assert_eq!(h.address_like, BTreeSet::from([U256::from_u64(0x42)]));
    }

    #[test]
    fn harvest_wide_literal_is_not_address() {
        let big = U256::pow2(200);
        let src = format!("contract C {{ function f(address a) public {{ uint x = {big}; require(a == {big}); }} }}");
        let h = harvest_constants(&parse(&src).unwrap());
        assert!(h.numeric.contains(&big));
        assert!(h.address_like.is_empty());
        assert!(big >= U256::pow2(160));
    }

    #[test]
    fn harvest_nothing() {
        let h = harvest_constants(&parse("contract C { function f() public { } }").unwrap());
        assert_eq!(h, HarvestedConstants::default());
    }

    #[test]
    fn reachable_after_follows_cfg() {
        let c = parse(
            "contract C { mapping m; function f(uint a) public { if (a == 1) { m[a] = 1; } else { call a.g(); } m[a] = 2; } }",
        )
        .unwrap();
        let f = c.function("f").unwrap();
        let call = f.statements().find(|s| matches!(s.op, Op::CallExternal { .. })).unwrap();
        let stores: Vec<StmtId> = f.statements().filter(|s| s.op == Op::Sstore).map(|s| s.id).collect();
        let after = f.reachable_after(call.id);
        assert!(!after.contains(&stores[0]));
        assert!(after.contains(&stores[1]));
    }
}
