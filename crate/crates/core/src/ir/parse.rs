use super::ast::*;
use super::{ParseError, ParseErrorKind, ValueType};
use crate::u256::U256;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(U256),
    Punct(&'static str),
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "`{n}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const PUNCTS: [&str; 26] = [
    "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/",
    "%", "!", "&", "|",
];

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::new(pos, ParseErrorKind::Syntax(msg.into()))
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, 2);
            loop {
                if i + 1 >= chars.len() {
                    return Err(syntax(pos, "unterminated comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(&mut i, &mut line, &mut col, 2);
                    break;
                }
                advance(&mut i, &mut line, &mut col, 1);
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let lit: String = chars[start..i].iter().collect();
            let v = lit.parse::<U256>().map_err(|e| syntax(pos, format!("bad literal `{lit}`: {e}")))?;
            out.push((Tok::Number(v), pos));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let p = PUNCTS
                .iter()
                .find(|p| rest.starts_with(**p))
                .ok_or_else(|| syntax(pos, format!("unexpected character `{c}`")))?;
            if *p == "&" || *p == "|" {
                return Err(syntax(pos, format!("unexpected character `{c}`")));
            }
            advance(&mut i, &mut line, &mut col, p.len());
            out.push((Tok::Punct(p), pos));
        }
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

/// Parses surface text into a syntax tree.
pub fn parse_ast(text: &str) -> Result<SourceContract, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let c = p.contract()?;
    p.expect_eof()?;
    Ok(c)
}

fn value_type(word: &str) -> Option<ValueType> {
    match word {
        "uint" | "uint256" => Some(ValueType::Uint256),
        "address" => Some(ValueType::Address),
        "bool" => Some(ValueType::Bool),
        _ => None,
    }
}

const KEYWORDS: [&str; 18] = [
    "contract", "function", "public", "internal", "mapping", "uint", "uint256", "address", "bool", "require", "if",
    "else", "call", "transfer", "selfdestruct", "delegatecall", "return", "msg",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{p}`, found {}", self.peek())))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{w}`, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && !matches!(s.as_str(), "true" | "false") => {
                self.bump();
                Ok(s)
            }
            t => Err(syntax(self.pos(), format!("expected identifier, found {t}"))),
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(syntax(self.pos(), format!("unexpected {t} after contract"))),
        }
    }

    fn contract(&mut self) -> Result<SourceContract, ParseError> {
        self.expect_word("contract")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut storage = Vec::new();
        let mut functions = Vec::new();
        while !self.is_punct("}") {
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Ident(w) if w == "function" => functions.push(self.function()?),
                Tok::Ident(w) if !functions.is_empty() && (w == "mapping" || value_type(&w).is_some()) => {
                    return Err(syntax(pos, "storage declarations must precede functions"));
                }
                Tok::Ident(w) if w == "mapping" => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_punct(";")?;
                    storage.push(StorageItem { ty: StorageType::Mapping, name, pos });
                }
                Tok::Ident(w) if matches!(value_type(&w), Some(ValueType::Uint256 | ValueType::Address)) => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_punct(";")?;
                    storage.push(StorageItem { ty: StorageType::Scalar(value_type(&w).unwrap()), name, pos });
                }
                t => return Err(syntax(pos, format!("expected declaration, found {t}"))),
            }
        }
        self.expect_punct("}")?;
        Ok(SourceContract { name, storage, functions })
    }

    fn function(&mut self) -> Result<FunctionDecl, ParseError> {
        let pos = self.pos();
        self.expect_word("function")?;
        let name = if self.is_word("constructor") {
            self.bump();
            "constructor".to_string()
        } else {
            self.ident()?
        };
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let tpos = self.pos();
                let ty = match self.bump() {
                    Tok::Ident(w) => value_type(&w).ok_or_else(|| syntax(tpos, format!("unknown type `{w}`")))?,
                    t => return Err(syntax(tpos, format!("expected parameter type, found {t}"))),
                };
                params.push((ty, self.ident()?));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let public = if self.is_word("public") {
            true
        } else if self.is_word("internal") {
            false
        } else {
            return Err(syntax(self.pos(), format!("expected `public` or `internal`, found {}", self.peek())));
        };
        self.bump();
        let body = self.block()?;
        Ok(FunctionDecl { name, params, public, body, pos })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(syntax(self.pos(), "unexpected end of input in block"));
            }
            body.push(self.stmt()?);
        }
        self.expect_punct("}")?;
        Ok(body)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn single_arg(&mut self) -> Result<Expr, ParseError> {
        self.expect_punct("(")?;
        let e = self.expr()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            t => return Err(syntax(pos, format!("expected statement, found {t}"))),
        };
        let kind = match word.as_str() {
            "require" => {
                self.bump();
                let e = self.single_arg()?;
                self.expect_punct(";")?;
                StmtKind::Require(e)
            }
            "if" => return self.if_stmt(),
            "call" => {
                self.bump();
                let target = self.postfix()?;
                self.expect_punct(".")?;
                let function = self.ident()?;
                let args = self.call_args()?;
                self.expect_punct(";")?;
                StmtKind::CallExternal { target, function, args }
            }
            "transfer" => {
                self.bump();
                let mut args = self.call_args()?;
                if args.len() != 2 {
                    return Err(syntax(pos, "transfer takes a recipient and an amount"));
                }
                self.expect_punct(";")?;
                let amount = args.pop().unwrap();
                StmtKind::Transfer { to: args.pop().unwrap(), amount }
            }
            "selfdestruct" | "delegatecall" => {
                self.bump();
                let e = self.single_arg()?;
                self.expect_punct(";")?;
                if word == "selfdestruct" {
                    StmtKind::Selfdestruct(e)
                } else {
                    StmtKind::Delegatecall(e)
                }
            }
            "return" => {
                self.bump();
                let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
                self.expect_punct(";")?;
                StmtKind::Return(value)
            }
            w => {
                let decl = value_type(w);
                if decl.is_some() {
                    self.bump();
                }
                let name = self.ident()?;
                if decl.is_none() && self.is_punct("(") {
                    let args = self.call_args()?;
                    self.expect_punct(";")?;
                    return Ok(Stmt { kind: StmtKind::Call { function: name, args }, pos });
                }
                let place = if decl.is_none() && self.eat_punct("[") {
                    let k = self.expr()?;
                    self.expect_punct("]")?;
                    Place::Index(name, k)
                } else {
                    Place::Name(name)
                };
                self.expect_punct("=")?;
                let value = self.expr()?;
                self.expect_punct(";")?;
                StmtKind::Assign { decl, place, value }
            }
        };
        Ok(Stmt { kind, pos })
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        self.expect_word("if")?;
        let cond = self.single_arg()?;
        let then_body = self.block()?;
        let else_body = if self.is_word("else") {
            self.bump();
            if self.is_word("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt { kind: StmtKind::If { cond, then_body, else_body }, pos })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Mod,
            "<" => BinaryOp::Lt,
            ">" => BinaryOp::Gt,
            "<=" => BinaryOp::Le,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "&&" => BinaryOp::And,
            "||" => BinaryOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            let pos = self.pos();
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Not(Box::new(e)), pos });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                ExprKind::Number(v)
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                ExprKind::Bool(w == "true")
            }
            Tok::Ident(w) if w == "msg" => {
                self.bump();
                self.expect_punct(".")?;
                self.expect_word("sender")?;
                ExprKind::Sender
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    ExprKind::Call(name, self.call_args()?)
                } else if self.eat_punct("[") {
                    let k = self.expr()?;
                    self.expect_punct("]")?;
                    ExprKind::Index(name, Box::new(k))
                } else {
                    ExprKind::Name(name)
                }
            }
            t => return Err(syntax(pos, format!("expected expression, found {t}"))),
        };
        Ok(Expr { kind, pos })
    }
}
