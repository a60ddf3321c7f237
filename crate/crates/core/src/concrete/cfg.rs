//! Flattening of a program into a control-flow graph with calls inlined,
//! used for exhaustive exploration.

use std::collections::HashMap;

use crate::frontend::{Block, Callee, Expr, FuncId, LValue, StmtId, StmtKind, ValidProgram, VarId};

pub type Pc = usize;

#[derive(Debug, Clone)]
pub enum Instr {
    /// Observation point: the state here is the entry state of a statement
    /// (for loops, the state at each test of the condition).
    Mark(StmtId),
    Declare(Vec<VarId>),
    Undeclare(Vec<VarId>),
    Assign(LValue, Expr),
    /// Copy a callee's return cell into the call destination.
    CopyReturn { dest: LValue, ret: VarId },
    SetInt(VarId, i64),
    Input { target: LValue, lo: Expr, hi: Expr },
    Assert { cond: Expr, stmt: StmtId },
    Branch { cond: Expr, then_pc: Pc, else_pc: Pc },
    Switch { scrutinee: Expr, cases: Vec<(i64, Pc)>, default: Pc },
    /// Jump to `targets[value of pointer]`.
    Dispatch { pointer: VarId, targets: Vec<Pc> },
    Jump(Pc),
    Halt,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub instrs: Vec<Instr>,
    pub entry: Pc,
}

struct Frame {
    func: FuncId,
    /// Locals of every open block, innermost last.
    scopes: Vec<Vec<VarId>>,
    labels: HashMap<String, (Pc, usize)>,
    /// Pending gotos: (instruction slot, label, scope depth at the goto).
    gotos: Vec<(Pc, String, usize)>,
    /// Exits of enclosing loops and switches: (patch slots, scope depth).
    breaks: Vec<(Vec<Pc>, usize)>,
    returns: Vec<(Pc, usize)>,
}

struct Lower<'a> {
    p: &'a ValidProgram,
    out: Vec<Instr>,
}

impl Lower<'_> {
    fn emit(&mut self, i: Instr) -> Pc {
        self.out.push(i);
        self.out.len() - 1
    }

    fn here(&self) -> Pc {
        self.out.len()
    }

    /// Emit undeclarations for scopes deeper than `depth` and a jump to be
    /// patched later; returns the jump slot.
    fn exit_to(&mut self, fr: &Frame, depth: usize) -> Pc {
        let vars: Vec<VarId> = fr.scopes[depth..].iter().rev().flatten().copied().collect();
        if !vars.is_empty() {
            self.emit(Instr::Undeclare(vars));
        }
        self.emit(Instr::Jump(usize::MAX))
    }

    fn patch(&mut self, slot: Pc, target: Pc) {
        self.out[slot] = Instr::Jump(target);
    }

    fn function(&mut self, f: FuncId) {
        let mut fr = Frame {
            func: f,
            scopes: Vec::new(),
            labels: HashMap::new(),
            gotos: Vec::new(),
            breaks: Vec::new(),
            returns: Vec::new(),
        };
        let body = &self.p.function(f).body;
        self.block(body, &mut fr);
        let end = self.here();
        for (slot, _) in std::mem::take(&mut fr.returns) {
            self.patch(slot, end);
        }
        for (slot, label, _) in std::mem::take(&mut fr.gotos) {
            let (pc, _) = fr.labels[&label];
            self.patch(slot, pc);
        }
        let _ = fr.func;
    }

    fn block(&mut self, b: &Block, fr: &mut Frame) {
        let locals: Vec<VarId> = b.locals().collect();
        if !locals.is_empty() {
            self.emit(Instr::Declare(locals.clone()));
        }
        fr.scopes.push(locals.clone());
        for s in &b.stmts {
            self.stmt(s, fr);
        }
        fr.scopes.pop();
        if !locals.is_empty() {
            self.emit(Instr::Undeclare(locals));
        }
    }

    fn stmt(&mut self, s: &crate::frontend::Stmt, fr: &mut Frame) {
        let p = self.p;
        let mark = self.emit(Instr::Mark(s.id));
        match &s.kind {
            StmtKind::Decl { var, init } => {
                if let Some(e) = init {
                    self.emit(Instr::Assign(LValue::Var(*var), e.clone()));
                }
            }
            StmtKind::Assign { target, value } => {
                self.emit(Instr::Assign(target.clone(), value.clone()));
            }
            StmtKind::SetFnPtr { pointer, index, .. } => {
                self.emit(Instr::SetInt(*pointer, *index as i64));
            }
            StmtKind::Input { target, lo, hi } => {
                self.emit(Instr::Input { target: target.clone(), lo: lo.clone(), hi: hi.clone() });
            }
            StmtKind::Assert(e) => {
                self.emit(Instr::Assert { cond: e.clone(), stmt: s.id });
            }
            StmtKind::If { cond, then_block, else_block } => {
                let br = self.emit(Instr::Halt);
                let then_pc = self.here();
                self.block(then_block, fr);
                let j = self.emit(Instr::Jump(usize::MAX));
                let else_pc = self.here();
                if let Some(e) = else_block {
                    self.block(e, fr);
                }
                let end = self.here();
                self.patch(j, end);
                self.out[br] = Instr::Branch { cond: cond.clone(), then_pc, else_pc };
            }
            StmtKind::While { cond, body } => {
                let br = self.emit(Instr::Halt);
                fr.breaks.push((Vec::new(), fr.scopes.len()));
                let body_pc = self.here();
                self.block(body, fr);
                self.emit(Instr::Jump(mark));
                let exit = self.here();
                let (slots, _) = fr.breaks.pop().unwrap();
                for slot in slots {
                    self.patch(slot, exit);
                }
                self.out[br] = Instr::Branch { cond: cond.clone(), then_pc: body_pc, else_pc: exit };
            }
            StmtKind::Block(b) => self.block(b, fr),
            StmtKind::Label(l) => {
                fr.labels.insert(l.clone(), (mark, fr.scopes.len()));
            }
            StmtKind::Goto(l) => {
                let (_, depth) = self.label_depth(s, fr, l);
                let slot = self.exit_to(fr, depth);
                fr.gotos.push((slot, l.clone(), depth));
            }
            StmtKind::Break => {
                let depth = fr.breaks.last().expect("validated break").1;
                let slot = self.exit_to(fr, depth);
                fr.breaks.last_mut().unwrap().0.push(slot);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    let rv = p.function(fr.func).ret_var.expect("value return");
                    self.emit(Instr::Assign(LValue::Var(rv), e.clone()));
                }
                let slot = self.exit_to(fr, 0);
                fr.returns.push((slot, 0));
            }
            StmtKind::Call { callee, dest } => {
                let fs: Vec<FuncId> = match callee {
                    Callee::Direct { func, .. } => vec![func.expect("resolved call")],
                    Callee::Indirect { pointer } => p.targets_of(*pointer).to_vec(),
                };
                let dispatch = match callee {
                    Callee::Indirect { .. } => Some(self.emit(Instr::Halt)),
                    Callee::Direct { .. } => None,
                };
                let mut entries = Vec::new();
                let mut ends = Vec::new();
                for f in &fs {
                    entries.push(self.here());
                    self.function(*f);
                    if let Some(d) = dest {
                        let ret = p.function(*f).ret_var.expect("call with destination returns a value");
                        self.emit(Instr::CopyReturn { dest: d.clone(), ret });
                    }
                    ends.push(self.emit(Instr::Jump(usize::MAX)));
                }
                let end = self.here();
                for j in ends {
                    self.patch(j, end);
                }
                if let (Some(slot), Callee::Indirect { pointer }) = (dispatch, callee) {
                    self.out[slot] = Instr::Dispatch { pointer: *pointer, targets: entries };
                }
            }
            StmtKind::Switch { scrutinee, arms } => {
                let sw = self.emit(Instr::Halt);
                fr.breaks.push((Vec::new(), fr.scopes.len()));
                let mut cases = Vec::new();
                let mut default = None;
                let mut ends = Vec::new();
                for a in arms {
                    let pc = self.here();
                    match a.value {
                        Some(v) => cases.push((v, pc)),
                        None => default = Some(pc),
                    }
                    self.block(&a.body, fr);
                    ends.push(self.emit(Instr::Jump(usize::MAX)));
                }
                let end = self.here();
                for j in ends {
                    self.patch(j, end);
                }
                let (slots, _) = fr.breaks.pop().unwrap();
                for slot in slots {
                    self.patch(slot, end);
                }
                self.out[sw] = Instr::Switch { scrutinee: scrutinee.clone(), cases, default: default.unwrap_or(end) };
            }
            StmtKind::Skip => {}
        }
    }

    /// Scope depth of the block holding label `l`, found by searching the
    /// enclosing function body.
    fn label_depth(&self, _s: &crate::frontend::Stmt, fr: &Frame, l: &str) -> (StmtId, usize) {
        fn search(b: &Block, l: &str, depth: usize) -> Option<(StmtId, usize)> {
            for s in &b.stmts {
                if let StmtKind::Label(x) = &s.kind {
                    if x == l {
                        return Some((s.id, depth));
                    }
                }
                for c in s.child_blocks() {
                    if let Some(r) = search(c, l, depth + 1) {
                        return Some(r);
                    }
                }
            }
            None
        }
        search(&self.p.function(fr.func).body, l, 1).expect("validated label")
    }
}

/// Lower the entry function (with every call inlined) into a CFG. Globals
/// are not part of the graph; execution starts from the initial state.
pub fn lower(p: &ValidProgram) -> Cfg {
    let mut lw = Lower { p, out: Vec::new() };
    let entry = lw.here();
    lw.function(p.entry);
    lw.emit(Instr::Halt);
    Cfg { instrs: lw.out, entry }
}
