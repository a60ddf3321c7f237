use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::FrontendError;

/// Recursive-descent parser producing a resolved, typed [`Program`].
///
/// Variables are resolved against lexical scopes as they are parsed;
/// function names are resolved later by validation.
pub fn parse_program(source: &str, tokens: &[Token]) -> Result<Program, FrontendError> {
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        vars: Vec::new(),
        scopes: vec![HashMap::new()],
        shadow: HashMap::new(),
        current_fn: None,
        next_stmt: 0,
    };
    p.program(source)
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    vars: Vec<VarInfo>,
    scopes: Vec<HashMap<String, VarId>>,
    shadow: HashMap<(FuncId, String), u32>,
    current_fn: Option<(FuncId, String)>,
    next_stmt: StmtId,
}

type PResult<T> = Result<T, FrontendError>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n)
    }

    fn here(&self) -> Location {
        match self.peek() {
            Some(t) => t.loc,
            None => self.toks.last().map(|t| t.loc).unwrap_or_default(),
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> PResult<T> {
        let found = match self.peek() {
            Some(t) => format!(" (found {:?})", t.text),
            None => " (found end of input)".to_string(),
        };
        Err(FrontendError::Syntax { loc: self.here(), message: format!("{}{found}", message.into()) })
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(t) if t.is(TokenKind::Punct, p))
    }

    fn at_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(t) if t.is(TokenKind::Keyword, k))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Location> {
        let loc = self.here();
        if self.eat_punct(p) {
            Ok(loc)
        } else {
            self.syntax(format!("expected '{p}'"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Location> {
        let loc = self.here();
        if self.at_kw(k) {
            self.pos += 1;
            Ok(loc)
        } else {
            self.syntax(format!("expected '{k}'"))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Location)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok((t.text.clone(), t.loc))
            }
            _ => self.syntax("expected identifier"),
        }
    }

    fn scalar_type(&self) -> Option<ScalarType> {
        if self.at_kw("int") {
            Some(ScalarType::Int)
        } else if self.at_kw("float") {
            Some(ScalarType::Float)
        } else {
            None
        }
    }

    fn lookup(&self, name: &str, loc: Location) -> PResult<VarId> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .ok_or_else(|| FrontendError::Undeclared { loc, name: name.to_string() })
    }

    fn declare(
        &mut self,
        name: String,
        loc: Location,
        ty: ScalarType,
        array_len: Option<u64>,
        fn_targets: Option<Vec<String>>,
    ) -> PResult<VarId> {
        if self.scopes.last().unwrap().contains_key(&name) {
            return Err(FrontendError::Type { loc, message: format!("redeclaration of '{name}'") });
        }
        let (cell, scope) = match &self.current_fn {
            None => (name.clone(), VarScope::Global),
            Some((fid, fname)) => {
                let n = self.shadow.entry((*fid, name.clone())).or_insert(0);
                *n += 1;
                let cell = if *n == 1 { format!("{fname}:{name}") } else { format!("{fname}:{name}#{n}") };
                (cell, VarScope::Local(*fid))
            }
        };
        let id = self.vars.len();
        self.vars.push(VarInfo {
            name: name.clone(),
            cell: Arc::from(cell),
            ty,
            array_len,
            fn_targets,
            scope,
            loc,
        });
        self.scopes.last_mut().unwrap().insert(name, id);
        Ok(id)
    }

    fn new_stmt(&mut self, loc: Location, dispatch: bool) -> Stmt {
        let id = self.next_stmt;
        self.next_stmt += 1;
        Stmt { id, loc, dispatch, kind: StmtKind::Skip }
    }

    // ---- top level ----

    fn program(&mut self, source: &str) -> PResult<Program> {
        let mut globals = Vec::new();
        let mut functions: Vec<Function> = Vec::new();
        while self.peek().is_some() {
            if self.at_kw("fnptr") {
                let var = self.fnptr_decl()?;
                globals.push(GlobalDecl { var, init: None });
                continue;
            }
            let loc = self.here();
            let ret = if self.at_kw("void") {
                None
            } else if let Some(t) = self.scalar_type() {
                Some(t)
            } else {
                return self.syntax("expected declaration or function");
            };
            let is_function = matches!(self.peek_at(2), Some(t) if t.is(TokenKind::Punct, "("));
            if is_function {
                self.pos += 1;
                let (name, _) = self.expect_ident()?;
                if functions.iter().any(|f| f.name == name) {
                    return Err(FrontendError::Type { loc, message: format!("function '{name}' defined twice") });
                }
                self.expect_punct("(")?;
                self.expect_punct(")")?;
                let fid = functions.len();
                let ret_var = match ret {
                    Some(ty) => {
                        let id = self.vars.len();
                        self.vars.push(VarInfo {
                            name: format!("{name}$ret"),
                            cell: Arc::from(format!("{name}$ret")),
                            ty,
                            array_len: None,
                            fn_targets: None,
                            scope: VarScope::Global,
                            loc,
                        });
                        globals.push(GlobalDecl { var: id, init: None });
                        Some(id)
                    }
                    None => None,
                };
                self.current_fn = Some((fid, name.clone()));
                // placeholder so nested lookups of the function index work
                functions.push(Function { name, loc, ret, ret_var, body: Block { stmts: Vec::new() } });
                let body = self.block()?;
                functions[fid].body = body;
                self.current_fn = None;
            } else {
                let Some(ty) = ret else {
                    return self.syntax("variables cannot have type void");
                };
                self.pos += 1;
                let (var, init) = self.var_decl_rest(ty, true)?;
                globals.push(GlobalDecl { var, init });
            }
        }
        let entry = functions
            .iter()
            .position(|f| f.name == "main")
            .ok_or(FrontendError::MissingEntry)?;
        Ok(Program {
            source: Arc::from(source),
            vars: std::mem::take(&mut self.vars),
            globals,
            functions,
            entry,
            stmt_count: self.next_stmt,
        })
    }

    fn fnptr_decl(&mut self) -> PResult<VarId> {
        self.expect_kw("fnptr")?;
        let (name, loc) = self.expect_ident()?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let mut targets = Vec::new();
        loop {
            let (t, _) = self.expect_ident()?;
            targets.push(t);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        self.declare(name, loc, ScalarType::Int, None, Some(targets))
    }

    /// After the type keyword: `name ([N])? (= init)? ;`
    fn var_decl_rest(&mut self, ty: ScalarType, global: bool) -> PResult<(VarId, Option<Expr>)> {
        let (name, loc) = self.expect_ident()?;
        let mut array_len = None;
        if self.eat_punct("[") {
            let len = match self.peek() {
                Some(t) if t.kind == TokenKind::Int => t.text.parse::<u64>().ok().filter(|n| *n > 0),
                _ => None,
            };
            let Some(len) = len else {
                return self.syntax("expected positive array size");
            };
            self.pos += 1;
            self.expect_punct("]")?;
            array_len = Some(len);
        }
        let init = if self.eat_punct("=") {
            if array_len.is_some() {
                return Err(FrontendError::Type { loc, message: "array initializers are not supported".into() });
            }
            let e = if global { self.signed_constant(ty)? } else { self.expr()? };
            if e.ty != ty {
                return Err(FrontendError::Type {
                    loc: e.loc,
                    message: format!("initializer of type {} for {ty} variable '{name}'", e.ty),
                });
            }
            Some(e)
        } else {
            None
        };
        self.expect_punct(";")?;
        let var = self.declare(name, loc, ty, array_len, None)?;
        Ok((var, init))
    }

    /// A literal, optionally negated; ints are accepted where floats are expected.
    fn signed_constant(&mut self, want: ScalarType) -> PResult<Expr> {
        let loc = self.here();
        let neg = self.eat_punct("-");
        let Some(t) = self.peek() else {
            return self.syntax("expected constant");
        };
        let e = match (t.kind, want) {
            (TokenKind::Int, ScalarType::Int) => {
                let v = parse_int(&t.text, neg, t.loc)?;
                Expr { loc, ty: ScalarType::Int, kind: ExprKind::Int(v) }
            }
            (TokenKind::Int | TokenKind::Float, ScalarType::Float) => {
                let v: f64 = t.text.parse().map_err(|_| FrontendError::Syntax {
                    loc: t.loc,
                    message: "malformed float".into(),
                })?;
                Expr { loc, ty: ScalarType::Float, kind: ExprKind::Float(if neg { -v } else { v }) }
            }
            _ => return self.syntax(format!("expected {want} constant")),
        };
        self.pos += 1;
        Ok(e)
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        self.scopes.push(HashMap::new());
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                return self.syntax("expected '}'");
            }
            stmts.push(self.stmt()?);
        }
        self.pos += 1;
        self.scopes.pop();
        Ok(Block { stmts })
    }

    /// Statements up to the next `case`, `default` or closing brace, in
    /// their own scope.
    fn arm_body(&mut self) -> PResult<Block> {
        self.scopes.push(HashMap::new());
        let mut stmts = Vec::new();
        while !(self.at_punct("}") || self.at_kw("case") || self.at_kw("default")) {
            if self.peek().is_none() {
                return self.syntax("expected '}'");
            }
            stmts.push(self.stmt()?);
        }
        self.scopes.pop();
        Ok(Block { stmts })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let dispatch = matches!(self.peek(), Some(t) if t.kind == TokenKind::Annotation);
        if dispatch {
            self.pos += 1;
        }
        let loc = self.here();
        let mut s = self.new_stmt(loc, dispatch);
        s.kind = self.stmt_kind()?;
        Ok(s)
    }

    fn stmt_kind(&mut self) -> PResult<StmtKind> {
        if self.current_fn.is_none() {
            return self.syntax("statement outside function");
        }
        let Some(tok) = self.peek() else {
            return self.syntax("expected statement");
        };
        if let Some(ty) = self.scalar_type() {
            self.pos += 1;
            let (var, init) = self.var_decl_rest(ty, false)?;
            return Ok(StmtKind::Decl { var, init });
        }
        match (tok.kind, tok.text.as_str()) {
            (TokenKind::Keyword, "if") => self.if_stmt(),
            (TokenKind::Keyword, "while") => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.condition()?;
                self.expect_punct(")")?;
                let body = self.block()?;
                Ok(StmtKind::While { cond, body })
            }
            (TokenKind::Keyword, "goto") => {
                self.pos += 1;
                let (label, _) = self.expect_ident()?;
                self.expect_punct(";")?;
                Ok(StmtKind::Goto(label))
            }
            (TokenKind::Keyword, "break") => {
                self.pos += 1;
                self.expect_punct(";")?;
                Ok(StmtKind::Break)
            }
            (TokenKind::Keyword, "return") => {
                self.pos += 1;
                let value = if self.at_punct(";") { None } else { Some(self.expr()?) };
                self.expect_punct(";")?;
                Ok(StmtKind::Return(value))
            }
            (TokenKind::Keyword, "switch") => self.switch_stmt(),
            (TokenKind::Keyword, "assert") => {
                self.pos += 1;
                self.expect_punct("(")?;
                let e = self.condition()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(StmtKind::Assert(e))
            }
            (TokenKind::Keyword, "input") => {
                self.pos += 1;
                self.expect_punct("(")?;
                let target = self.lvalue()?;
                let ty = self.vars[target.var()].ty;
                self.expect_punct(",")?;
                let lo = self.signed_constant(ty)?;
                self.expect_punct(",")?;
                let hi = self.signed_constant(ty)?;
                let empty = match (&lo.kind, &hi.kind) {
                    (ExprKind::Int(a), ExprKind::Int(b)) => a > b,
                    (ExprKind::Float(a), ExprKind::Float(b)) => a > b,
                    _ => false,
                };
                if empty {
                    return Err(FrontendError::Type { loc: hi.loc, message: "empty input range".into() });
                }
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(StmtKind::Input { target, lo, hi })
            }
            (TokenKind::Punct, "{") => Ok(StmtKind::Block(self.block()?)),
            (TokenKind::Punct, ";") => {
                self.pos += 1;
                Ok(StmtKind::Skip)
            }
            (TokenKind::Punct, "(") => {
                let callee = self.indirect_callee()?;
                self.expect_punct(";")?;
                Ok(StmtKind::Call { callee, dest: None })
            }
            (TokenKind::Ident, _) => {
                if matches!(self.peek_at(1), Some(t) if t.is(TokenKind::Punct, ":")) {
                    self.pos += 2;
                    return Ok(StmtKind::Label(tok.text.clone()));
                }
                if matches!(self.peek_at(1), Some(t) if t.is(TokenKind::Punct, "(")) {
                    let callee = self.direct_callee()?;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Call { callee, dest: None });
                }
                self.assignment()
            }
            _ => self.syntax("expected statement"),
        }
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("if")?;
        self.expect_punct("(")?;
        let cond = self.condition()?;
        self.expect_punct(")")?;
        let then_block = self.block()?;
        let else_block = if self.at_kw("else") {
            self.pos += 1;
            if self.at_kw("if") {
                let loc = self.here();
                let mut s = self.new_stmt(loc, false);
                s.kind = self.if_stmt()?;
                Some(Block { stmts: vec![s] })
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(StmtKind::If { cond, then_block, else_block })
    }

    fn switch_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("switch")?;
        self.expect_punct("(")?;
        let scrutinee = self.expr()?;
        if scrutinee.ty != ScalarType::Int {
            return Err(FrontendError::Type { loc: scrutinee.loc, message: "switch on non-int value".into() });
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut arms: Vec<SwitchArm> = Vec::new();
        while !self.eat_punct("}") {
            let loc = self.here();
            let value = if self.at_kw("case") {
                self.pos += 1;
                let c = self.signed_constant(ScalarType::Int)?;
                let ExprKind::Int(v) = c.kind else { unreachable!() };
                if arms.iter().any(|a| a.value == Some(v)) {
                    return Err(FrontendError::Type { loc, message: format!("duplicate case {v}") });
                }
                Some(v)
            } else if self.at_kw("default") {
                self.pos += 1;
                if arms.iter().any(|a| a.value.is_none()) {
                    return Err(FrontendError::Type { loc, message: "duplicate default".into() });
                }
                None
            } else {
                return self.syntax("expected 'case' or 'default'");
            };
            self.expect_punct(":")?;
            let body = self.arm_body()?;
            arms.push(SwitchArm { loc, value, body });
        }
        Ok(StmtKind::Switch { scrutinee, arms })
    }

    fn direct_callee(&mut self) -> PResult<Callee> {
        let (name, _) = self.expect_ident()?;
        self.expect_punct("(")?;
        self.expect_punct(")")?;
        Ok(Callee::Direct { name, func: None })
    }

    fn indirect_callee(&mut self) -> PResult<Callee> {
        self.expect_punct("(")?;
        self.expect_punct("*")?;
        let (name, loc) = self.expect_ident()?;
        let pointer = self.lookup(&name, loc)?;
        if !self.vars[pointer].is_fn_pointer() {
            return Err(FrontendError::Type { loc, message: format!("'{name}' is not a function pointer") });
        }
        self.expect_punct(")")?;
        self.expect_punct("(")?;
        self.expect_punct(")")?;
        Ok(Callee::Indirect { pointer })
    }

    fn assignment(&mut self) -> PResult<StmtKind> {
        // function-pointer assignment `fp = g;`
        if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
            if a.kind == TokenKind::Ident && b.is(TokenKind::Punct, "=") {
                if let Ok(v) = self.lookup(&a.text, a.loc) {
                    if let Some(targets) = self.vars[v].fn_targets.clone() {
                        self.pos += 2;
                        let (target, tloc) = self.expect_ident()?;
                        let Some(index) = targets.iter().position(|t| *t == target) else {
                            return Err(FrontendError::UnresolvedTarget { loc: tloc, name: target });
                        };
                        self.expect_punct(";")?;
                        return Ok(StmtKind::SetFnPtr { pointer: v, target, index });
                    }
                }
            }
        }
        let target = self.lvalue()?;
        self.expect_punct("=")?;
        let is_direct_call = matches!(
            (self.peek(), self.peek_at(1)),
            (Some(a), Some(b)) if a.kind == TokenKind::Ident && b.is(TokenKind::Punct, "(")
        );
        let is_indirect_call = matches!(
            (self.peek(), self.peek_at(1)),
            (Some(a), Some(b)) if a.is(TokenKind::Punct, "(") && b.is(TokenKind::Punct, "*")
        );
        if is_direct_call || is_indirect_call {
            let callee = if is_direct_call { self.direct_callee()? } else { self.indirect_callee()? };
            self.expect_punct(";")?;
            return Ok(StmtKind::Call { callee, dest: Some(target) });
        }
        let value = self.expr()?;
        let ty = self.vars[target.var()].ty;
        if value.ty != ty {
            return Err(FrontendError::Type {
                loc: value.loc,
                message: format!("assigning {} value to {ty} location", value.ty),
            });
        }
        self.expect_punct(";")?;
        Ok(StmtKind::Assign { target, value })
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let (name, loc) = self.expect_ident()?;
        let v = self.lookup(&name, loc)?;
        let (is_fn, is_array) = (self.vars[v].is_fn_pointer(), self.vars[v].is_array());
        if is_fn {
            return Err(FrontendError::Type { loc, message: format!("function pointer '{name}' used as a value") });
        }
        if self.eat_punct("[") {
            if !is_array {
                return Err(FrontendError::Type { loc, message: format!("'{name}' is not an array") });
            }
            let idx = self.expr()?;
            if idx.ty != ScalarType::Int {
                return Err(FrontendError::Type { loc: idx.loc, message: "array index must be int".into() });
            }
            self.expect_punct("]")?;
            Ok(LValue::Index(v, Box::new(idx)))
        } else {
            if is_array {
                return Err(FrontendError::Type { loc, message: format!("array '{name}' used as a scalar") });
            }
            Ok(LValue::Var(v))
        }
    }

    // ---- expressions ----

    fn condition(&mut self) -> PResult<Expr> {
        let e = self.expr()?;
        if e.ty != ScalarType::Int {
            return Err(FrontendError::Type { loc: e.loc, message: "condition must be int".into() });
        }
        Ok(e)
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop_here(&self) -> Option<BinOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Punct {
            return None;
        }
        Some(match t.text.as_str() {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop_here() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let loc = self.here();
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = make_binary(op, lhs, rhs, loc)?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.here();
        if self.at_punct("-") {
            // fold negative literals so INT64_MIN is expressible
            if let Some(t) = self.peek_at(1) {
                if t.kind == TokenKind::Int || t.kind == TokenKind::Float {
                    self.pos += 1;
                    let ty = if t.kind == TokenKind::Int { ScalarType::Int } else { ScalarType::Float };
                    let mut e = self.signed_literal_after_minus(ty)?;
                    e.loc = loc;
                    return Ok(e);
                }
            }
            self.pos += 1;
            let e = self.unary()?;
            return Ok(Expr { loc, ty: e.ty, kind: ExprKind::Unary(UnOp::Neg, Box::new(e)) });
        }
        if self.eat_punct("!") {
            let e = self.unary()?;
            if e.ty != ScalarType::Int {
                return Err(FrontendError::Type { loc, message: "'!' applied to float".into() });
            }
            return Ok(Expr { loc, ty: ScalarType::Int, kind: ExprKind::Unary(UnOp::Not, Box::new(e)) });
        }
        if self.at_punct("(") {
            if let Some(t) = self.peek_at(1) {
                let cast_ty = match (t.kind, t.text.as_str()) {
                    (TokenKind::Keyword, "int") => Some(ScalarType::Int),
                    (TokenKind::Keyword, "float") => Some(ScalarType::Float),
                    _ => None,
                };
                if let Some(ty) = cast_ty {
                    self.pos += 2;
                    self.expect_punct(")")?;
                    let e = self.unary()?;
                    return Ok(Expr { loc, ty, kind: ExprKind::Cast(ty, Box::new(e)) });
                }
            }
        }
        self.primary()
    }

    fn signed_literal_after_minus(&mut self, ty: ScalarType) -> PResult<Expr> {
        let t = self.peek().unwrap();
        let loc = t.loc;
        self.pos += 1;
        match ty {
            ScalarType::Int => Ok(Expr { loc, ty, kind: ExprKind::Int(parse_int(&t.text, true, loc)?) }),
            ScalarType::Float => {
                let v: f64 = t.text.parse().map_err(|_| FrontendError::Syntax { loc, message: "malformed float".into() })?;
                Ok(Expr { loc, ty, kind: ExprKind::Float(-v) })
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.here();
        let Some(t) = self.peek() else {
            return self.syntax("expected expression");
        };
        match t.kind {
            TokenKind::Int => {
                self.pos += 1;
                Ok(Expr { loc, ty: ScalarType::Int, kind: ExprKind::Int(parse_int(&t.text, false, loc)?) })
            }
            TokenKind::Float => {
                self.pos += 1;
                let v: f64 = t.text.parse().map_err(|_| FrontendError::Syntax { loc, message: "malformed float".into() })?;
                if !v.is_finite() {
                    return Err(FrontendError::Syntax { loc, message: "float literal out of range".into() });
                }
                Ok(Expr { loc, ty: ScalarType::Float, kind: ExprKind::Float(v) })
            }
            TokenKind::Ident => {
                let lv = self.lvalue()?;
                let ty = self.vars[lv.var()].ty;
                Ok(Expr { loc, ty, kind: ExprKind::Read(lv) })
            }
            TokenKind::Punct if t.text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.syntax("expected expression"),
        }
    }
}

fn parse_int(text: &str, neg: bool, loc: Location) -> PResult<i64> {
    let mag: i128 = text
        .parse()
        .map_err(|_| FrontendError::Syntax { loc, message: "integer literal out of range".into() })?;
    let v = if neg { -mag } else { mag };
    i64::try_from(v).map_err(|_| FrontendError::Syntax { loc, message: "integer literal out of range".into() })
}

fn make_binary(op: BinOp, lhs: Expr, rhs: Expr, loc: Location) -> PResult<Expr> {
    if lhs.ty != rhs.ty {
        return Err(FrontendError::Type {
            loc,
            message: format!("operands of '{}' have types {} and {}", op.symbol(), lhs.ty, rhs.ty),
        });
    }
    let ty = if op.is_comparison() || op.is_logical() { ScalarType::Int } else { lhs.ty };
    if (op.is_logical() || op == BinOp::Rem) && lhs.ty != ScalarType::Int {
        return Err(FrontendError::Type { loc, message: format!("'{}' requires int operands", op.symbol()) });
    }
    Ok(Expr { loc, ty, kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)) })
}
