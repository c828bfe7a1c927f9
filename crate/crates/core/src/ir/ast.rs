//! Surface syntax tree, before lowering.

use std::fmt;

use super::ValueType;
use crate::u256::U256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StorageType {
    Scalar(ValueType),
    Mapping,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageItem {
    pub ty: StorageType,
    pub name: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceContract {
    pub name: String,
    pub storage: Vec<StorageItem>,
    pub functions: Vec<FunctionDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<(ValueType, String)>,
    pub public: bool,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Name(String),
    Index(String, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign { decl: Option<ValueType>, place: Place, value: Expr },
    Require(Expr),
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    CallExternal { target: Expr, function: String, args: Vec<Expr> },
    Transfer { to: Expr, amount: Expr },
    Selfdestruct(Expr),
    Delegatecall(Expr),
    Return(Option<Expr>),
    /// An internal call evaluated for its effects.
    Call { function: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Gt | BinaryOp::Le | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Number(U256),
    Bool(bool),
    Sender,
    Name(String),
    Index(String, Box<Expr>),
    Call(String, Vec<Expr>),
    Not(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, pos: Pos::default() }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Expr]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

/// Fully parenthesized surface form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(v) => write!(f, "{v}"),
            ExprKind::Bool(b) => write!(f, "{b}"),
            ExprKind::Sender => f.write_str("msg.sender"),
            ExprKind::Name(n) => f.write_str(n),
            ExprKind::Index(m, k) => write!(f, "{m}[{k}]"),
            ExprKind::Call(name, args) => {
                write!(f, "{name}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            ExprKind::Not(e) => write!(f, "!{e}"),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

fn surface_type(t: ValueType) -> &'static str {
    match t {
        ValueType::Uint256 => "uint",
        ValueType::Address => "address",
        ValueType::Bool => "bool",
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Stmt], indent: usize) -> fmt::Result {
    for s in body {
        write_stmt(f, s, indent)?;
    }
    Ok(())
}

fn write_stmt(f: &mut fmt::Formatter<'_>, s: &Stmt, indent: usize) -> fmt::Result {
    let pad = "    ".repeat(indent);
    f.write_str(&pad)?;
    match &s.kind {
        StmtKind::Assign { decl, place, value } => {
            if let Some(t) = decl {
                write!(f, "{} ", surface_type(*t))?;
            }
            match place {
                Place::Name(n) => write!(f, "{n}")?,
                Place::Index(m, k) => write!(f, "{m}[{k}]")?,
            }
            writeln!(f, " = {value};")
        }
        StmtKind::Require(e) => writeln!(f, "require({e});"),
        StmtKind::If { cond, then_body, else_body } => {
            writeln!(f, "if ({cond}) {{")?;
            write_body(f, then_body, indent + 1)?;
            if else_body.is_empty() {
                writeln!(f, "{pad}}}")
            } else {
                writeln!(f, "{pad}}} else {{")?;
                write_body(f, else_body, indent + 1)?;
                writeln!(f, "{pad}}}")
            }
        }
        StmtKind::CallExternal { target, function, args } => {
            match target.kind {
                ExprKind::Name(_) | ExprKind::Number(_) | ExprKind::Sender => write!(f, "call {target}.{function}(")?,
                _ => write!(f, "call ({target}).{function}(")?,
            }
            write_args(f, args)?;
            writeln!(f, ");")
        }
        StmtKind::Transfer { to, amount } => writeln!(f, "transfer({to}, {amount});"),
        StmtKind::Selfdestruct(e) => writeln!(f, "selfdestruct({e});"),
        StmtKind::Delegatecall(e) => writeln!(f, "delegatecall({e});"),
        StmtKind::Return(None) => writeln!(f, "return;"),
        StmtKind::Return(Some(e)) => writeln!(f, "return {e};"),
        StmtKind::Call { function, args } => {
            write!(f, "{function}(")?;
            write_args(f, args)?;
            writeln!(f, ");")
        }
    }
}

/// Renders the contract back to surface syntax.
impl fmt::Display for SourceContract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "contract {} {{", self.name)?;
        for item in &self.storage {
            let ty = match item.ty {
                StorageType::Scalar(t) => surface_type(t),
                StorageType::Mapping => "mapping",
            };
            writeln!(f, "    {ty} {};", item.name)?;
        }
        for func in &self.functions {
            let params: Vec<String> = func.params.iter().map(|(t, n)| format!("{} {n}", surface_type(*t))).collect();
            let vis = if func.public { "public" } else { "internal" };
            writeln!(f, "    function {}({}) {vis} {{", func.name, params.join(", "))?;
            write_body(f, &func.body, 2)?;
            writeln!(f, "    }}")?;
        }
        writeln!(f, "}}")
    }
}
