use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::{
    BasicBlock, BlockId, Contract, Function, Op, Operand, Param, ParseError, ParseErrorKind, Statement, StmtId,
    StorageDecl, StorageKind, ValueType, Var, Visibility,
};
use crate::symexpr::BinOp;
use crate::u256::U256;

fn invalid(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::new(pos, ParseErrorKind::Invalid(msg.into()))
}

fn mismatch(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::new(pos, ParseErrorKind::TypeMismatch(msg.into()))
}

fn undeclared(pos: Pos, name: &str) -> ParseError {
    ParseError::new(pos, ParseErrorKind::Undeclared(name.to_string()))
}

fn compatible(a: ValueType, b: ValueType) -> bool {
    a.is_numeric() == b.is_numeric()
}

/// What a function's `return` statements produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Returns {
    Nothing,
    Value(ValueType),
}

struct Ctx<'a> {
    storage: BTreeMap<&'a str, StorageDecl>,
    decls: BTreeMap<&'a str, &'a FunctionDecl>,
    returns: BTreeMap<String, Returns>,
    address_constants: BTreeSet<U256>,
}

pub(super) fn lower(src: &SourceContract) -> Result<Contract, ParseError> {
    let mut storage = BTreeMap::new();
    let mut decls_out = Vec::new();
    for (slot, item) in src.storage.iter().enumerate() {
        let kind = match item.ty {
            StorageType::Scalar(t) => StorageKind::Scalar(t),
            StorageType::Mapping => StorageKind::Mapping,
        };
        let decl = StorageDecl { name: item.name.clone(), slot: slot as u64, kind };
        if storage.insert(item.name.as_str(), decl.clone()).is_some() {
            return Err(invalid(item.pos, format!("storage `{}` declared twice", item.name)));
        }
        decls_out.push(decl);
    }
    let mut decls = BTreeMap::new();
    for f in &src.functions {
        if decls.insert(f.name.as_str(), f).is_some() {
            return Err(invalid(f.pos, format!("function `{}` declared twice", f.name)));
        }
        if storage.contains_key(f.name.as_str()) {
            return Err(invalid(f.pos, format!("`{}` is already a storage name", f.name)));
        }
        if f.name == Function::CONSTRUCTOR && !f.params.is_empty() {
            return Err(invalid(f.pos, "constructor takes no parameters"));
        }
    }
    let mut ctx = Ctx { storage, decls, returns: BTreeMap::new(), address_constants: BTreeSet::new() };

    let mut lowered: BTreeMap<String, Function> = BTreeMap::new();
    for name in call_order(src, &ctx)? {
        let decl = ctx.decls[name.as_str()];
        let (func, returns) = FnLower::new(&mut ctx, decl).run()?;
        ctx.returns.insert(name.clone(), returns);
        lowered.insert(name, func);
    }

    let mut functions: Vec<Function> = src.functions.iter().map(|f| lowered.remove(&f.name).unwrap()).collect();
    for (next, s) in functions.iter_mut().flat_map(|f| f.blocks.iter_mut()).flat_map(|b| b.stmts.iter_mut()).enumerate() {
        s.id = StmtId(next as u32);
    }
    Ok(Contract { name: src.name.clone(), storage: decls_out, functions, address_constants: ctx.address_constants })
}

fn internal_calls<'a>(body: &'a [Stmt], out: &mut Vec<(&'a str, Pos)>) {
    fn in_expr<'a>(e: &'a Expr, out: &mut Vec<(&'a str, Pos)>) {
        match &e.kind {
            ExprKind::Call(name, args) => {
                out.push((name, e.pos));
                args.iter().for_each(|a| in_expr(a, out));
            }
            ExprKind::Index(_, k) | ExprKind::Not(k) => in_expr(k, out),
            ExprKind::Binary(_, a, b) => {
                in_expr(a, out);
                in_expr(b, out);
            }
            _ => {}
        }
    }
    for s in body {
        match &s.kind {
            StmtKind::Assign { place, value, .. } => {
                if let Place::Index(_, k) = place {
                    in_expr(k, out);
                }
                in_expr(value, out);
            }
            StmtKind::Require(e) | StmtKind::Selfdestruct(e) | StmtKind::Delegatecall(e) | StmtKind::Return(Some(e)) => {
                in_expr(e, out)
            }
            StmtKind::Return(None) => {}
            StmtKind::If { cond, then_body, else_body } => {
                in_expr(cond, out);
                internal_calls(then_body, out);
                internal_calls(else_body, out);
            }
            StmtKind::CallExternal { target, args, .. } => {
                in_expr(target, out);
                args.iter().for_each(|a| in_expr(a, out));
            }
            StmtKind::Transfer { to, amount } => {
                in_expr(to, out);
                in_expr(amount, out);
            }
            StmtKind::Call { function, args } => {
                out.push((function, s.pos));
                args.iter().for_each(|a| in_expr(a, out));
            }
        }
    }
}

/// Callees before callers; internal calls must not recurse.
fn call_order(src: &SourceContract, ctx: &Ctx<'_>) -> Result<Vec<String>, ParseError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit(name: &str, ctx: &Ctx<'_>, marks: &mut BTreeMap<String, Mark>, order: &mut Vec<String>) -> Result<(), ParseError> {
        let decl = ctx.decls[name];
        marks.insert(name.to_string(), Mark::Active);
        let mut calls = Vec::new();
        internal_calls(&decl.body, &mut calls);
        for (callee, pos) in calls {
            if callee == Function::CONSTRUCTOR || !ctx.decls.contains_key(callee) {
                return Err(undeclared(pos, callee));
            }
            match marks.get(callee) {
                Some(Mark::Active) => return Err(invalid(pos, format!("recursive call to `{callee}`"))),
                Some(Mark::Done) => {}
                None => visit(callee, ctx, marks, order)?,
            }
        }
        marks.insert(name.to_string(), Mark::Done);
        order.push(name.to_string());
        Ok(())
    }
    let mut marks = BTreeMap::new();
    let mut order = Vec::new();
    for f in &src.functions {
        if !marks.contains_key(&f.name) {
            visit(&f.name, ctx, &mut marks, &mut order)?;
        }
    }
    Ok(order)
}

struct FnLower<'c, 'a> {
    ctx: &'c mut Ctx<'a>,
    decl: &'a FunctionDecl,
    blocks: Vec<Vec<Statement>>,
    /// `None` once the current path has terminated.
    cur: Option<usize>,
    scope: BTreeMap<String, ValueType>,
    temps: u32,
    returns: Option<Returns>,
}

impl<'c, 'a> FnLower<'c, 'a> {
    fn new(ctx: &'c mut Ctx<'a>, decl: &'a FunctionDecl) -> Self {
        FnLower { ctx, decl, blocks: vec![Vec::new()], cur: Some(0), scope: BTreeMap::new(), temps: 0, returns: None }
    }

    fn run(mut self) -> Result<(Function, Returns), ParseError> {
        let decl = self.decl;
        let mut params = Vec::new();
        for (ty, name) in &decl.params {
            if self.ctx.storage.contains_key(name.as_str()) {
                return Err(invalid(decl.pos, format!("parameter `{name}` shadows storage")));
            }
            if self.scope.insert(name.clone(), *ty).is_some() {
                return Err(invalid(decl.pos, format!("parameter `{name}` declared twice")));
            }
            params.push(Param { name: name.as_str().into(), ty: *ty });
        }
        self.body(&decl.body)?;
        if self.cur.is_some() {
            if let Some(Returns::Value(_)) = self.returns {
                return Err(invalid(decl.pos, format!("function `{}` may end without returning a value", decl.name)));
            }
            self.emit(Op::Return, vec![], None);
        }
        let blocks = self
            .blocks
            .into_iter()
            .enumerate()
            .map(|(i, stmts)| BasicBlock { id: BlockId(i as u32), stmts })
            .collect();
        let visibility = if decl.public { Visibility::Public } else { Visibility::Internal };
        let func = Function { name: decl.name.clone(), visibility, params, blocks, entry: BlockId(0) };
        Ok((func, self.returns.unwrap_or(Returns::Nothing)))
    }

    fn new_block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    fn emit(&mut self, op: Op, operands: Vec<Operand>, result: Option<Var>) {
        let terminates = op.is_terminator();
        let b = self.cur.expect("emit on a live path");
        self.blocks[b].push(Statement { id: StmtId(0), op, operands, result });
        if terminates {
            self.cur = None;
        }
    }

    fn temp(&mut self) -> Var {
        let t: Var = format!("$t{}", self.temps).into();
        self.temps += 1;
        t
    }

    fn emit_temp(&mut self, op: Op, operands: Vec<Operand>) -> Operand {
        let t = self.temp();
        self.emit(op, operands, Some(t.clone()));
        Operand::Var(t)
    }

    fn note_address(&mut self, operand: &Operand, ty: ValueType) {
        if let (Operand::Lit(v), ValueType::Address) = (operand, ty) {
            if v.bits() <= 160 {
                self.ctx.address_constants.insert(*v);
            }
        }
    }

    fn body(&mut self, stmts: &[Stmt]) -> Result<(), ParseError> {
        for s in stmts {
            if self.cur.is_none() {
                return Err(invalid(s.pos, "unreachable statement"));
            }
            self.stmt(s)?;
        }
        Ok(())
    }

    /// Binds `name` to the operand, reusing the producing statement when possible.
    fn bind(&mut self, name: &str, value: Operand) {
        let b = self.cur.unwrap();
        if let Operand::Var(t) = &value {
            if t.starts_with('$') {
                if let Some(last) = self.blocks[b].last_mut() {
                    if last.result.as_ref() == Some(t) {
                        last.result = Some(name.into());
                        return;
                    }
                }
            }
        }
        match value {
            Operand::Lit(v) => self.emit(Op::Const(v), vec![], Some(name.into())),
            other => self.emit(Op::Move, vec![other], Some(name.into())),
        }
    }

    fn address_operand(&mut self, e: &Expr, what: &str) -> Result<Operand, ParseError> {
        let (o, ty) = self.expr(e)?;
        if !ty.is_numeric() {
            return Err(mismatch(e.pos, format!("{what} must be an address, found {ty}")));
        }
        self.note_address(&o, ValueType::Address);
        Ok(o)
    }

    fn numeric_operand(&mut self, e: &Expr, what: &str) -> Result<Operand, ParseError> {
        let (o, ty) = self.expr(e)?;
        if !ty.is_numeric() {
            return Err(mismatch(e.pos, format!("{what} must be numeric, found {ty}")));
        }
        Ok(o)
    }

    fn mapping_slot(&self, name: &str, pos: Pos) -> Result<u64, ParseError> {
        match self.ctx.storage.get(name) {
            Some(StorageDecl { kind: StorageKind::Mapping, slot, .. }) => Ok(*slot),
            Some(_) => Err(invalid(pos, format!("`{name}` is not a mapping"))),
            None if self.scope.contains_key(name) => Err(invalid(pos, format!("`{name}` is not a mapping"))),
            None => Err(undeclared(pos, name)),
        }
    }

    fn cell_address(&mut self, slot: u64, key: &Expr) -> Result<Operand, ParseError> {
        let (k, _) = self.expr(key)?;
        let cat = self.emit_temp(Op::Concat, vec![k, Operand::Slot(slot)]);
        Ok(self.emit_temp(Op::Sha3, vec![cat]))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ParseError> {
        match &s.kind {
            StmtKind::Assign { decl: Some(ty), place: Place::Name(name), value } => {
                if self.scope.contains_key(name) {
                    return Err(invalid(s.pos, format!("`{name}` is already declared")));
                }
                if self.ctx.storage.contains_key(name.as_str()) || self.ctx.decls.contains_key(name.as_str()) {
                    return Err(invalid(s.pos, format!("local `{name}` shadows a contract member")));
                }
                let (o, vty) = self.expr(value)?;
                if !compatible(*ty, vty) {
                    return Err(mismatch(value.pos, format!("cannot initialize {ty} `{name}` with {vty}")));
                }
                self.note_address(&o, *ty);
                self.scope.insert(name.clone(), *ty);
                self.bind(name, o);
            }
            StmtKind::Assign { decl: Some(_), place: Place::Index(..), .. } => {
                return Err(invalid(s.pos, "a mapping cell cannot be declared"));
            }
            StmtKind::Assign { decl: None, place: Place::Name(name), value } => {
                if let Some(&ty) = self.scope.get(name) {
                    let (o, vty) = self.expr(value)?;
                    if !compatible(ty, vty) {
                        return Err(mismatch(value.pos, format!("cannot assign {vty} to {ty} `{name}`")));
                    }
                    self.note_address(&o, ty);
                    self.bind(name, o);
                } else {
                    match self.ctx.storage.get(name.as_str()).cloned() {
                        Some(StorageDecl { kind: StorageKind::Scalar(ty), slot, .. }) => {
                            let (o, vty) = self.expr(value)?;
                            if !compatible(ty, vty) {
                                return Err(mismatch(value.pos, format!("cannot store {vty} in {ty} `{name}`")));
                            }
                            self.note_address(&o, ty);
                            self.emit(Op::Sstore, vec![Operand::Slot(slot), o], None);
                        }
                        Some(_) => return Err(invalid(s.pos, format!("mapping `{name}` must be indexed"))),
                        None => return Err(undeclared(s.pos, name)),
                    }
                }
            }
            StmtKind::Assign { decl: None, place: Place::Index(m, key), value } => {
                let slot = self.mapping_slot(m, s.pos)?;
                let addr = self.cell_address(slot, key)?;
                let (o, _) = self.expr(value)?;
                self.emit(Op::Sstore, vec![addr, o], None);
            }
            StmtKind::Require(cond) => {
                let c = self.condition(cond)?;
                self.emit(Op::Require, vec![c], None);
            }
            StmtKind::If { cond, then_body, else_body } => {
                let c = self.condition(cond)?;
                let then_b = self.new_block();
                let else_b = self.new_block();
                let (tb, eb) = (BlockId(then_b as u32), BlockId(else_b as u32));
                self.emit(Op::Branch { then_block: tb, else_block: eb }, vec![c], None);
                let saved = self.scope.clone();
                self.cur = Some(then_b);
                self.body(then_body)?;
                let then_end = self.cur;
                self.scope = saved.clone();
                self.cur = Some(else_b);
                self.body(else_body)?;
                let else_end = self.cur;
                self.scope = saved;
                let ends: Vec<usize> = [then_end, else_end].into_iter().flatten().collect();
                if ends.is_empty() {
                    self.cur = None;
                } else {
                    let join = self.new_block();
                    for b in ends {
                        self.cur = Some(b);
                        self.emit(Op::Jump(BlockId(join as u32)), vec![], None);
                    }
                    self.cur = Some(join);
                }
            }
            StmtKind::CallExternal { target, function, args } => {
                let t = self.address_operand(target, "call target")?;
                let mut operands = vec![t];
                for a in args {
                    operands.push(self.expr(a)?.0);
                }
                self.emit(Op::CallExternal { signature: function.clone() }, operands, None);
            }
            StmtKind::Transfer { to, amount } => {
                let t = self.address_operand(to, "transfer recipient")?;
                let a = self.numeric_operand(amount, "transfer amount")?;
                self.emit(Op::Transfer, vec![t, a], None);
            }
            StmtKind::Selfdestruct(e) => {
                let a = self.address_operand(e, "selfdestruct beneficiary")?;
                self.emit(Op::Selfdestruct, vec![a], None);
            }
            StmtKind::Delegatecall(e) => {
                let a = self.address_operand(e, "delegatecall target")?;
                self.emit(Op::Delegatecall, vec![a], None);
            }
            StmtKind::Return(value) => {
                let (operands, returns) = match value {
                    None => (vec![], Returns::Nothing),
                    Some(e) => {
                        let (o, ty) = self.expr(e)?;
                        let o = match o {
                            Operand::Lit(v) => self.emit_temp(Op::Const(v), vec![]),
                            o => o,
                        };
                        (vec![o], Returns::Value(ty))
                    }
                };
                match (self.returns, returns) {
                    (None, r) => self.returns = Some(r),
                    (Some(Returns::Value(a)), Returns::Value(b)) if compatible(a, b) => {}
                    (Some(Returns::Nothing), Returns::Nothing) => {}
                    _ => return Err(mismatch(s.pos, "inconsistent return values")),
                }
                self.emit(Op::Return, operands, None);
            }
            StmtKind::Call { function, args } => {
                let operands = self.call_args(function, args, s.pos)?;
                self.emit(Op::CallInternal { callee: function.clone() }, operands, None);
            }
        }
        Ok(())
    }

    fn call_args(&mut self, function: &str, args: &[Expr], pos: Pos) -> Result<Vec<Operand>, ParseError> {
        let callee = *self.ctx.decls.get(function).ok_or_else(|| undeclared(pos, function))?;
        if callee.params.len() != args.len() {
            return Err(invalid(pos, format!("`{function}` takes {} arguments, {} given", callee.params.len(), args.len())));
        }
        let mut operands = Vec::new();
        for ((pty, pname), a) in callee.params.iter().zip(args) {
            let (o, ty) = self.expr(a)?;
            if !compatible(*pty, ty) {
                return Err(mismatch(a.pos, format!("argument `{pname}` of `{function}` expects {pty}, found {ty}")));
            }
            self.note_address(&o, *pty);
            operands.push(o);
        }
        Ok(operands)
    }

    /// Lowers a condition, testing numbers against zero.
    fn condition(&mut self, e: &Expr) -> Result<Operand, ParseError> {
        let (o, ty) = self.expr(e)?;
        Ok(self.truthy(o, ty))
    }

    fn truthy(&mut self, o: Operand, ty: ValueType) -> Operand {
        if ty == ValueType::Bool {
            return o;
        }
        let is_zero = self.emit_temp(Op::Bin(BinOp::Eq), vec![o, Operand::Lit(U256::ZERO)]);
        self.emit_temp(Op::Not, vec![is_zero])
    }

    fn expr(&mut self, e: &Expr) -> Result<(Operand, ValueType), ParseError> {
        Ok(match &e.kind {
            ExprKind::Number(v) => (Operand::Lit(*v), ValueType::Uint256),
            ExprKind::Bool(b) => (Operand::Lit(U256::from_bool(*b)), ValueType::Bool),
            ExprKind::Sender => (self.emit_temp(Op::Caller, vec![]), ValueType::Address),
            ExprKind::Name(name) => {
                if let Some(&ty) = self.scope.get(name) {
                    (Operand::Var(name.as_str().into()), ty)
                } else {
                    match self.ctx.storage.get(name.as_str()).cloned() {
                        Some(StorageDecl { kind: StorageKind::Scalar(ty), slot, .. }) => {
                            (self.emit_temp(Op::Sload, vec![Operand::Slot(slot)]), ty)
                        }
                        Some(_) => return Err(invalid(e.pos, format!("mapping `{name}` must be indexed"))),
                        None => return Err(undeclared(e.pos, name)),
                    }
                }
            }
            ExprKind::Index(m, key) => {
                let slot = self.mapping_slot(m, e.pos)?;
                let addr = self.cell_address(slot, key)?;
                (self.emit_temp(Op::Sload, vec![addr]), ValueType::Uint256)
            }
            ExprKind::Call(function, args) => {
                let operands = self.call_args(function, args, e.pos)?;
                let ty = match self.ctx.returns.get(function.as_str()) {
                    Some(Returns::Value(ty)) => *ty,
                    _ => return Err(invalid(e.pos, format!("`{function}` does not return a value"))),
                };
                (self.emit_temp(Op::CallInternal { callee: function.clone() }, operands), ty)
            }
            ExprKind::Not(inner) => {
                let (o, ty) = self.expr(inner)?;
                if ty == ValueType::Bool {
                    (self.emit_temp(Op::Not, vec![o]), ValueType::Bool)
                } else {
                    (self.emit_temp(Op::Bin(BinOp::Eq), vec![o, Operand::Lit(U256::ZERO)]), ValueType::Bool)
                }
            }
            ExprKind::Binary(op, a, b) => self.binary(*op, a, b, e.pos)?,
        })
    }

    fn binary(&mut self, op: BinaryOp, a: &Expr, b: &Expr, pos: Pos) -> Result<(Operand, ValueType), ParseError> {
        let (oa, ta) = self.expr(a)?;
        let (ob, tb) = self.expr(b)?;
        let arith = |op| -> Option<BinOp> {
            Some(match op {
                BinaryOp::Add => BinOp::Add,
                BinaryOp::Sub => BinOp::Sub,
                BinaryOp::Mul => BinOp::Mul,
                BinaryOp::Div => BinOp::Div,
                BinaryOp::Mod => BinOp::Mod,
                _ => return None,
            })
        };
        if let Some(bop) = arith(op) {
            if !ta.is_numeric() || !tb.is_numeric() {
                return Err(mismatch(pos, format!("`{}` needs numeric operands, found {ta} and {tb}", op.symbol())));
            }
            return Ok((self.emit_temp(Op::Bin(bop), vec![oa, ob]), ValueType::Uint256));
        }
        let bool_result = |this: &mut Self, bop: BinOp, x: Operand, y: Operand, negate: bool| {
            let r = this.emit_temp(Op::Bin(bop), vec![x, y]);
            let r = if negate { this.emit_temp(Op::Not, vec![r]) } else { r };
            (r, ValueType::Bool)
        };
        Ok(match op {
            BinaryOp::Lt | BinaryOp::Gt | BinaryOp::Le | BinaryOp::Ge => {
                if !ta.is_numeric() || !tb.is_numeric() {
                    return Err(mismatch(pos, format!("`{}` needs numeric operands, found {ta} and {tb}", op.symbol())));
                }
                match op {
                    BinaryOp::Lt => bool_result(self, BinOp::Lt, oa, ob, false),
                    BinaryOp::Gt => bool_result(self, BinOp::Gt, oa, ob, false),
                    BinaryOp::Le => bool_result(self, BinOp::Gt, oa, ob, true),
                    _ => bool_result(self, BinOp::Lt, oa, ob, true),
                }
            }
            BinaryOp::Eq | BinaryOp::Ne => {
                if !compatible(ta, tb) {
                    return Err(mismatch(pos, format!("cannot compare {ta} with {tb}")));
                }
                if ta == ValueType::Address {
                    self.note_address(&ob, ValueType::Address);
                }
                if tb == ValueType::Address {
                    self.note_address(&oa, ValueType::Address);
                }
                bool_result(self, BinOp::Eq, oa, ob, op == BinaryOp::Ne)
            }
            BinaryOp::And | BinaryOp::Or => {
                let x = self.truthy(oa, ta);
                let y = self.truthy(ob, tb);
                let bop = if op == BinaryOp::And { BinOp::And } else { BinOp::Or };
                bool_result(self, bop, x, y, false)
            }
            _ => unreachable!("arithmetic handled above"),
        })
    }
}
