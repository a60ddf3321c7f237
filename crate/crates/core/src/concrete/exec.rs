//! Structural execution of one concrete run, following the lifted semantics:
//! the machine carries a direct state (absent once control has jumped away)
//! and a bank of states waiting at forward jump targets.

use std::collections::BTreeMap;

use rand::Rng;

use crate::frontend::{Block, Callee, ExprKind, FuncId, Program, StmtId, StmtKind, Target, ValidProgram};

use super::eval::{assign, eval_expr, write};
use super::state::{ErrorKind, ErrorRecord, State, Value};

/// States pending at jump targets. A single run has at most one live state,
/// so each target holds at most one.
pub type LabelBank = BTreeMap<Target, State>;

/// The step budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetExhausted;

pub struct Machine<'a, R> {
    program: &'a ValidProgram,
    rng: R,
    steps: u64,
    budget: u64,
    record: bool,
    breaks: Vec<Target>,
    /// (statement, state on entry) for every executed statement; loop
    /// statements appear once per evaluation of their condition.
    pub trace: Vec<(StmtId, State)>,
    pub errors: Vec<ErrorRecord>,
}

impl<'a, R: Rng> Machine<'a, R> {
    pub fn new(program: &'a ValidProgram, rng: R, budget: u64, record: bool) -> Self {
        Machine { program, rng, steps: 0, budget, record, breaks: Vec::new(), trace: Vec::new(), errors: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn p(&self) -> &'a Program {
        self.program.program()
    }

    fn tick(&mut self, id: StmtId, state: &State) -> Result<(), BudgetExhausted> {
        if self.steps >= self.budget {
            return Err(BudgetExhausted);
        }
        self.steps += 1;
        if self.record {
            self.trace.push((id, state.clone()));
        }
        Ok(())
    }

    /// Initial state: globals bound to their initializers or zero.
    pub fn initial_state(&mut self) -> State {
        super::initial_state(self.p(), &mut self.errors)
    }

    /// Run the entry function from the initial state.
    pub fn run(&mut self) -> Result<Option<State>, BudgetExhausted> {
        let st = self.initial_state();
        let mut bank = LabelBank::new();
        self.call(self.p().entry, Some(st), &mut bank)
    }

    fn call(&mut self, f: FuncId, direct: Option<State>, bank: &mut LabelBank) -> Result<Option<State>, BudgetExhausted> {
        let saved = std::mem::take(&mut self.breaks);
        let body = &self.p().function(f).body;
        let out = self.exec_block(body, f, direct, bank);
        self.breaks = saved;
        let out = out?;
        Ok(out.or_else(|| bank.remove(&Target::FnEnd(f))))
    }

    pub fn exec_block(
        &mut self,
        b: &Block,
        func: FuncId,
        mut direct: Option<State>,
        bank: &mut LabelBank,
    ) -> Result<Option<State>, BudgetExhausted> {
        let p = self.p();
        if let Some(st) = &mut direct {
            for v in b.locals() {
                st.declare(p, v);
            }
        }
        for s in &b.stmts {
            direct = self.exec_stmt(s, func, direct, bank)?;
        }
        for v in b.locals() {
            if let Some(st) = &mut direct {
                st.undeclare(p, v);
            }
            for st in bank.values_mut() {
                st.undeclare(p, v);
            }
        }
        Ok(direct)
    }

    /// Execute one statement of function `func`.
    pub fn exec_stmt(
        &mut self,
        s: &crate::frontend::Stmt,
        func: FuncId,
        direct: Option<State>,
        bank: &mut LabelBank,
    ) -> Result<Option<State>, BudgetExhausted> {
        let p = self.p();
        let direct = match &s.kind {
            StmtKind::Label(l) => direct.or_else(|| bank.remove(&Target::Label(func, l.clone()))),
            _ => direct,
        };
        let Some(mut st) = direct else { return Ok(None) };
        if !matches!(s.kind, StmtKind::While { .. }) {
            self.tick(s.id, &st)?;
        }
        match &s.kind {
            StmtKind::Decl { var, init } => {
                if let Some(e) = init {
                    assign(p, &mut st, &crate::frontend::LValue::Var(*var), e, &mut self.errors);
                }
            }
            StmtKind::Assign { target, value } => assign(p, &mut st, target, value, &mut self.errors),
            StmtKind::SetFnPtr { pointer, index, .. } => {
                write(p, &mut st, &crate::frontend::LValue::Var(*pointer), Value::Int(*index as i64), &mut self.errors)
            }
            StmtKind::Input { target, lo, hi } => {
                let v = match (&lo.kind, &hi.kind) {
                    (ExprKind::Int(a), ExprKind::Int(b)) => Value::Int(self.rng.gen_range(*a..=*b)),
                    (ExprKind::Float(a), ExprKind::Float(b)) => {
                        Value::Float(if a == b { *a } else { self.rng.gen_range(*a..=*b) })
                    }
                    _ => unreachable!("input bounds are constants of the target type"),
                };
                write(p, &mut st, target, v, &mut self.errors);
            }
            StmtKind::Assert(e) => {
                if !eval_expr(p, &st, e, &mut self.errors).is_true() {
                    self.errors.push(ErrorRecord { kind: ErrorKind::AssertFailure, loc: s.loc, values: vec![] });
                    return Ok(None);
                }
            }
            StmtKind::If { cond, then_block, else_block } => {
                let c = eval_expr(p, &st, cond, &mut self.errors).is_true();
                let empty = Block { stmts: Vec::new() };
                let b = if c { then_block } else { else_block.as_ref().unwrap_or(&empty) };
                return self.exec_block(b, func, Some(st), bank);
            }
            StmtKind::While { cond, body } => {
                self.breaks.push(Target::LoopExit(s.id));
                let mut cur = Some(st);
                let r = loop {
                    let Some(st) = cur.take() else { break Ok(None) };
                    if let Err(e) = self.tick(s.id, &st) {
                        break Err(e);
                    }
                    if !eval_expr(p, &st, cond, &mut self.errors).is_true() {
                        break Ok(Some(st));
                    }
                    match self.exec_block(body, func, Some(st), bank) {
                        Ok(next) => cur = next,
                        Err(e) => break Err(e),
                    }
                };
                self.breaks.pop();
                return Ok(r?.or_else(|| bank.remove(&Target::LoopExit(s.id))));
            }
            StmtKind::Block(b) => return self.exec_block(b, func, Some(st), bank),
            StmtKind::Label(_) | StmtKind::Skip => {}
            StmtKind::Goto(l) => {
                bank.insert(Target::Label(func, l.clone()), st);
                return Ok(None);
            }
            StmtKind::Break => {
                let t = self.breaks.last().expect("validated break").clone();
                bank.insert(t, st);
                return Ok(None);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    let rv = p.function(func).ret_var.expect("value return in non-void function");
                    assign(p, &mut st, &crate::frontend::LValue::Var(rv), e, &mut self.errors);
                }
                bank.insert(Target::FnEnd(func), st);
                return Ok(None);
            }
            StmtKind::Call { callee, dest } => {
                let f = match callee {
                    Callee::Direct { func, .. } => func.expect("resolved call"),
                    Callee::Indirect { pointer } => {
                        let k = st.scalar(&p.var(*pointer).cell).expect("bound pointer").as_int();
                        self.program.targets_of(*pointer)[k as usize]
                    }
                };
                let out = self.call(f, Some(st), bank)?;
                let Some(mut st) = out else { return Ok(None) };
                if let Some(d) = dest {
                    let rv = p.function(f).ret_var.expect("call with destination returns a value");
                    let v = st.scalar(&p.var(rv).cell).expect("bound return cell");
                    write(p, &mut st, d, v, &mut self.errors);
                }
                return Ok(Some(st));
            }
            StmtKind::Switch { scrutinee, arms } => {
                let v = eval_expr(p, &st, scrutinee, &mut self.errors).as_int();
                let arm = arms.iter().find(|a| a.value == Some(v)).or_else(|| arms.iter().find(|a| a.value.is_none()));
                let Some(arm) = arm else { return Ok(Some(st)) };
                self.breaks.push(Target::SwitchExit(s.id));
                let r = self.exec_block(&arm.body, func, Some(st), bank);
                self.breaks.pop();
                return Ok(r?.or_else(|| bank.remove(&Target::SwitchExit(s.id))));
            }
        }
        Ok(Some(st))
    }
}
