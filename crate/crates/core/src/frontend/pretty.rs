use std::fmt::Write;

use super::ast::*;
use super::lexer::DISPATCH_ANNOTATION;

/// Render a program back into the source dialect. Re-parsing the output
/// yields a structurally identical program (same statement ids, same
/// variables), though source locations differ.
pub fn pretty_print(p: &Program) -> String {
    let mut pp = Printer { p, out: String::new(), indent: 0 };
    pp.program();
    pp.out
}

/// Render a single expression.
pub fn expr_to_string(p: &Program, e: &Expr) -> String {
    let mut pp = Printer { p, out: String::new(), indent: 0 };
    pp.expr(e, 0);
    pp.out
}

struct Printer<'a> {
    p: &'a Program,
    out: String,
    indent: usize,
}

impl Printer<'_> {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn program(&mut self) {
        let p = self.p;
        let ret_vars: Vec<VarId> = p.functions.iter().filter_map(|f| f.ret_var).collect();
        for g in &p.globals {
            if ret_vars.contains(&g.var) {
                continue;
            }
            let v = p.var(g.var);
            if let Some(targets) = &v.fn_targets {
                self.line(&format!("fnptr {} = {{{}}};", v.name, targets.join(", ")));
            } else {
                let mut s = self.decl_head(g.var);
                if let Some(init) = &g.init {
                    s.push_str(" = ");
                    s.push_str(&expr_to_string(p, init));
                }
                s.push(';');
                self.line(&s);
            }
        }
        for f in &p.functions {
            if !self.out.is_empty() {
                self.out.push('\n');
            }
            let ret = match f.ret {
                None => "void".to_string(),
                Some(t) => t.to_string(),
            };
            self.line(&format!("{ret} {}() {{", f.name));
            self.indent += 1;
            self.stmts(&f.body);
            self.indent -= 1;
            self.line("}");
        }
    }

    fn decl_head(&self, var: VarId) -> String {
        let v = self.p.var(var);
        match v.array_len {
            Some(n) => format!("{} {}[{n}]", v.ty, v.name),
            None => format!("{} {}", v.ty, v.name),
        }
    }

    fn stmts(&mut self, b: &Block) {
        for s in &b.stmts {
            self.stmt(s);
        }
    }

    fn open_block(&mut self, head: &str, b: &Block) {
        self.line(&format!("{head} {{"));
        self.indent += 1;
        self.stmts(b);
        self.indent -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        if s.dispatch {
            self.line(DISPATCH_ANNOTATION);
        }
        let p = self.p;
        match &s.kind {
            StmtKind::Decl { var, init } => {
                let mut t = self.decl_head(*var);
                if let Some(e) = init {
                    t.push_str(" = ");
                    t.push_str(&expr_to_string(p, e));
                }
                t.push(';');
                self.line(&t);
            }
            StmtKind::Assign { target, value } => {
                let t = format!("{} = {};", self.lvalue(target), expr_to_string(p, value));
                self.line(&t);
            }
            StmtKind::SetFnPtr { pointer, target, .. } => {
                self.line(&format!("{} = {target};", p.var(*pointer).name));
            }
            StmtKind::If { .. } => self.if_chain(s, "if"),
            StmtKind::While { cond, body } => {
                let head = format!("while ({})", expr_to_string(p, cond));
                self.open_block(&head, body);
                self.line("}");
            }
            StmtKind::Block(b) => {
                self.line("{");
                self.indent += 1;
                self.stmts(b);
                self.indent -= 1;
                self.line("}");
            }
            StmtKind::Label(l) => self.line(&format!("{l}:")),
            StmtKind::Goto(l) => self.line(&format!("goto {l};")),
            StmtKind::Break => self.line("break;"),
            StmtKind::Return(None) => self.line("return;"),
            StmtKind::Return(Some(e)) => self.line(&format!("return {};", expr_to_string(p, e))),
            StmtKind::Call { callee, dest } => {
                let call = match callee {
                    Callee::Direct { name, .. } => format!("{name}()"),
                    Callee::Indirect { pointer } => format!("(*{})()", p.var(*pointer).name),
                };
                match dest {
                    Some(d) => {
                        let t = format!("{} = {call};", self.lvalue(d));
                        self.line(&t)
                    }
                    None => self.line(&format!("{call};")),
                }
            }
            StmtKind::Switch { scrutinee, arms } => {
                self.line(&format!("switch ({}) {{", expr_to_string(p, scrutinee)));
                for a in arms {
                    match a.value {
                        Some(v) => self.line(&format!("case {v}:")),
                        None => self.line("default:"),
                    }
                    self.indent += 1;
                    self.stmts(&a.body);
                    self.indent -= 1;
                }
                self.line("}");
            }
            StmtKind::Assert(e) => self.line(&format!("assert({});", expr_to_string(p, e))),
            StmtKind::Input { target, lo, hi } => {
                let t = format!(
                    "input({}, {}, {});",
                    self.lvalue(target),
                    expr_to_string(p, lo),
                    expr_to_string(p, hi)
                );
                self.line(&t);
            }
            StmtKind::Skip => self.line(";"),
        }
    }

    fn if_chain(&mut self, s: &Stmt, head: &str) {
        let StmtKind::If { cond, then_block, else_block } = &s.kind else { unreachable!() };
        let h = format!("{head} ({})", expr_to_string(self.p, cond));
        self.open_block(&h, then_block);
        match else_block {
            None => self.line("}"),
            Some(e) => {
                // `else if` is stored as an else block holding exactly one
                // unannotated if statement
                if let [inner] = e.stmts.as_slice() {
                    if matches!(inner.kind, StmtKind::If { .. }) && !inner.dispatch {
                        self.if_chain(inner, "} else if");
                        return;
                    }
                }
                self.line("} else {");
                self.indent += 1;
                self.stmts(e);
                self.indent -= 1;
                self.line("}");
            }
        }
    }

    fn lvalue(&self, l: &LValue) -> String {
        match l {
            LValue::Var(v) => self.p.var(*v).name.clone(),
            LValue::Index(v, i) => format!("{}[{}]", self.p.var(*v).name, expr_to_string(self.p, i)),
        }
    }

    fn expr(&mut self, e: &Expr, parent_prec: u8) {
        match &e.kind {
            ExprKind::Read(l) => {
                let s = self.lvalue(l);
                self.out.push_str(&s);
            }
            ExprKind::Int(v) => {
                let _ = write!(self.out, "{v}");
            }
            ExprKind::Float(v) => self.out.push_str(&float_literal(*v)),
            ExprKind::Binary(op, a, b) => {
                let prec = op.precedence();
                let paren = prec < parent_prec;
                if paren {
                    self.out.push('(');
                }
                self.expr(a, prec);
                let _ = write!(self.out, " {} ", op.symbol());
                // left-associative: the right operand needs strictly tighter binding
                self.expr(b, prec + 1);
                if paren {
                    self.out.push(')');
                }
            }
            ExprKind::Unary(op, a) => {
                self.out.push(if *op == UnOp::Neg { '-' } else { '!' });
                self.operand(a);
            }
            ExprKind::Cast(t, a) => {
                let _ = write!(self.out, "({t})");
                self.operand(a);
            }
        }
    }

    /// Operand of a prefix operator: bare when it is an l-value, otherwise
    /// parenthesized (this also keeps `-(5)` distinct from the literal `-5`).
    fn operand(&mut self, a: &Expr) {
        if matches!(a.kind, ExprKind::Read(_)) {
            self.expr(a, u8::MAX);
        } else {
            self.out.push('(');
            self.expr(a, 0);
            self.out.push(')');
        }
    }
}

/// Shortest decimal that re-parses to the same value, always lexed as a float.
fn float_literal(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") {
        s
    } else {
        format!("{s}.0")
    }
}
