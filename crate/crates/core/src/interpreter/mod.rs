//! Abstract interpreter: computes the abstract semantics of a program by
//! induction on its syntax, with calls inlined and forward jumps handled by
//! the lifted state of [`FlowState`].
//!
//! Loops are solved in iteration mode (warnings suppressed) by widening with
//! thresholds followed by a few narrowing passes. The stabilized invariant is
//! then checked by a separate re-application of the loop body, which in
//! report mode is also the pass that records warnings.

pub mod branch;
pub mod flow;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::absdomain::{assign, guard, store, AbstractEnv, EnvError, Evaluator, Interval, Ladder, WarningKind, WarningLog};
use crate::frontend::{
    Block, Callee, Expr, ExprKind, FuncId, LValue, Location, ScalarType, Stmt, StmtId, StmtKind, Target, ValidProgram,
};

pub use branch::{branch_count, dispatch_kind, parallel_safe, DispatchKind};
pub use flow::{FlowState, Mode};

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub ladder: Ladder,
    /// Ascending iterations that use plain join before widening starts.
    pub widening_delay: u32,
    /// Maximum number of decreasing passes after stabilization.
    pub narrowing_passes: u32,
    /// Ascending iterations allowed per loop before giving up.
    pub iteration_bound: u32,
    /// Record the abstract state at every statement (report mode only).
    pub observe: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { ladder: Ladder::default(), widening_delay: 2, narrowing_passes: 2, iteration_bound: 1000, observe: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{loc}: loop invariant is not a post-fixpoint")]
    CheckFailed { stmt: StmtId, loc: Location },
    #[error("{loc}: loop not stable after {bound} iterations")]
    NonTermination { stmt: StmtId, loc: Location, bound: u32 },
    #[error("internal scope error: {0}")]
    Scope(#[from] EnvError),
    #[error("branch execution failed: {0}")]
    Executor(String),
}

/// Result of analyzing one dispatch branch from a base state.
#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub env: AbstractEnv,
    pub warnings: WarningLog,
    /// Loop invariants recorded inside the branch (report mode).
    pub invariants: BTreeMap<StmtId, AbstractEnv>,
    /// Analysis time in microseconds.
    pub micros: u64,
}

/// Analyzes all branches of a dispatch statement, possibly elsewhere.
/// Outcomes are returned in branch order.
pub trait BranchExecutor {
    fn execute(&mut self, stmt: StmtId, base: &AbstractEnv, mode: Mode) -> Result<Vec<BranchOutcome>, AnalysisError>;
}

#[derive(Debug, Clone)]
pub struct AnalysisResult {
    /// State at the end of the entry function (⊥ if it never returns).
    pub final_env: AbstractEnv,
    pub warnings: WarningLog,
    /// Invariant at the head of every analyzed loop, joined over contexts.
    pub invariants: BTreeMap<StmtId, AbstractEnv>,
    /// Entry state of every reached statement, when observation is enabled.
    pub observations: BTreeMap<StmtId, AbstractEnv>,
    /// Largest number of environments held at once.
    pub peak_retained: usize,
}

impl AnalysisResult {
    /// SHA-256 over the canonical bytes of the final state, the warnings and
    /// the loop invariants.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.final_env.canonical_bytes());
        h.update(self.warnings.canonical_bytes());
        h.update((self.invariants.len() as u32).to_be_bytes());
        for (id, env) in &self.invariants {
            h.update(id.to_be_bytes());
            h.update(env.canonical_bytes());
        }
        h.finalize().into()
    }
}

type Tamper<'p> = Box<dyn FnMut(StmtId, &AbstractEnv) -> Option<AbstractEnv> + 'p>;

pub struct Analyzer<'p> {
    program: &'p ValidProgram,
    config: AnalysisConfig,
    executor: Option<&'p mut dyn BranchExecutor>,
    dispatch: BTreeSet<StmtId>,
    tamper: Option<Tamper<'p>>,
    invariants: BTreeMap<StmtId, AbstractEnv>,
    observations: BTreeMap<StmtId, AbstractEnv>,
    breaks: Vec<Target>,
    held: usize,
    peak: usize,
}

fn zero(ty: ScalarType) -> Interval {
    match ty {
        ScalarType::Int => Interval::int_const(0),
        ScalarType::Float => Interval::float_const(0.0),
    }
}

fn take(env: &mut AbstractEnv) -> AbstractEnv {
    std::mem::replace(env, AbstractEnv::bottom())
}

fn log_for(mode: Mode, w: &mut WarningLog) -> Option<&mut WarningLog> {
    (mode == Mode::Report).then_some(w)
}

impl<'p> Analyzer<'p> {
    pub fn new(program: &'p ValidProgram, config: AnalysisConfig) -> Self {
        Analyzer {
            program,
            config,
            executor: None,
            dispatch: BTreeSet::new(),
            tamper: None,
            invariants: BTreeMap::new(),
            observations: BTreeMap::new(),
            breaks: Vec::new(),
            held: 0,
            peak: 0,
        }
    }

    /// Hand the branches of the given dispatch statements to `executor`.
    /// Statements whose branches jump outside themselves are kept local.
    pub fn with_executor(mut self, executor: &'p mut dyn BranchExecutor, dispatch: impl IntoIterator<Item = StmtId>) -> Self {
        let p = self.program;
        self.dispatch = dispatch
            .into_iter()
            .filter(|id| p.stmt(*id).is_some_and(|(_, s)| parallel_safe(s) && branch_count(p, s) > 0))
            .collect();
        self.executor = Some(executor);
        self
    }

    /// Install a hook that may replace each loop invariant before it is
    /// checked; used to test that the check catches wrong invariants.
    pub fn set_tamper(&mut self, f: impl FnMut(StmtId, &AbstractEnv) -> Option<AbstractEnv> + 'p) {
        self.tamper = Some(Box::new(f));
    }

    /// Globals bound to their initializers, or zero.
    pub fn initial_env(&self, mut log: Option<&mut WarningLog>) -> Result<AbstractEnv, AnalysisError> {
        let p = self.program;
        let mut env = AbstractEnv::empty();
        for g in &p.globals {
            let info = p.var(g.var);
            env = env.new_var_with(&info.cell, zero(info.ty))?;
            if let Some(init) = &g.init {
                env = assign(p, &LValue::Var(g.var), init, &env, log.as_deref_mut())?;
            }
        }
        Ok(env)
    }

    /// Analyze the entry function from the initial state.
    pub fn run(&mut self, mode: Mode) -> Result<AnalysisResult, AnalysisError> {
        let mut log = WarningLog::new();
        let init = self.initial_env(log_for(mode, &mut log))?;
        let mut r = self.run_from(init, mode)?;
        log.merge(&r.warnings);
        r.warnings = log;
        Ok(r)
    }

    /// Analyze the entry function from `entry_env`.
    pub fn run_from(&mut self, entry_env: AbstractEnv, mode: Mode) -> Result<AnalysisResult, AnalysisError> {
        let p = self.program;
        let mut fs = FlowState::new(entry_env);
        let loc = p.function(p.entry).loc;
        self.call(p.entry, None, loc, &mut fs, mode)?;
        Ok(AnalysisResult {
            final_env: fs.direct,
            warnings: fs.warnings,
            invariants: std::mem::take(&mut self.invariants),
            observations: std::mem::take(&mut self.observations),
            peak_retained: self.peak,
        })
    }

    fn note(&mut self, fs: &FlowState) {
        let live = self.held + fs.pending.len() + self.invariants.len() + 1;
        self.peak = self.peak.max(live);
    }

    fn record(map: &mut BTreeMap<StmtId, AbstractEnv>, id: StmtId, env: &AbstractEnv) -> Result<(), EnvError> {
        let joined = match map.get(&id) {
            Some(old) => old.join(env)?,
            None => env.clone(),
        };
        map.insert(id, joined);
        Ok(())
    }

    pub fn analyze_block(&mut self, b: &Block, func: FuncId, fs: &mut FlowState, mode: Mode) -> Result<(), AnalysisError> {
        let p = self.program;
        let locals: Vec<_> = b.locals().collect();
        for v in &locals {
            let info = p.var(*v);
            fs.direct = fs.direct.new_var(&info.cell, info.ty)?;
        }
        for s in &b.stmts {
            self.analyze_stmt(s, func, fs, mode)?;
        }
        for v in &locals {
            let cell = &p.var(*v).cell;
            fs.direct = fs.direct.forget(cell);
            for e in fs.pending.values_mut() {
                *e = e.forget(cell);
            }
        }
        Ok(())
    }

    pub fn analyze_stmt(&mut self, s: &Stmt, func: FuncId, fs: &mut FlowState, mode: Mode) -> Result<(), AnalysisError> {
        let p = self.program;
        if let StmtKind::Label(l) = &s.kind {
            fs.absorb(&Target::Label(func, l.clone()))?;
        }
        if fs.direct.is_bottom() {
            return Ok(());
        }
        self.note(fs);
        if mode == Mode::Report && self.config.observe && !matches!(s.kind, StmtKind::While { .. }) {
            Self::record(&mut self.observations, s.id, &fs.direct)?;
        }
        if self.executor.is_some() && self.dispatch.contains(&s.id) {
            return self.analyze_dispatch(s, fs, mode);
        }
        match &s.kind {
            StmtKind::Decl { var, init } => {
                if let Some(e) = init {
                    fs.direct = assign(p, &LValue::Var(*var), e, &fs.direct, log_for(mode, &mut fs.warnings))?;
                }
            }
            StmtKind::Assign { target, value } => {
                fs.direct = assign(p, target, value, &fs.direct, log_for(mode, &mut fs.warnings))?;
            }
            StmtKind::SetFnPtr { pointer, index, .. } => {
                fs.direct = fs.direct.set(&p.var(*pointer).cell, Interval::int_const(*index as i64));
            }
            StmtKind::Input { target, lo, hi } => {
                let mut ev = Evaluator::with_log(p, &fs.direct, log_for(mode, &mut fs.warnings));
                let v = ev.eval(lo)?.join(&ev.eval(hi)?);
                if let LValue::Index(var, idx) = target {
                    ev.index(*var, idx)?;
                }
                fs.direct = store(p, &fs.direct, target, v)?;
            }
            StmtKind::Assert(cond) => {
                let v = Evaluator::with_log(p, &fs.direct, log_for(mode, &mut fs.warnings)).eval(cond)?;
                if mode == Mode::Report && v.contains_zero() {
                    fs.warnings.report(s.loc, WarningKind::AssertMayFail, vec![v]);
                }
                fs.direct = guard(p, cond, true, &fs.direct)?;
            }
            StmtKind::If { cond, then_block, else_block } => {
                Evaluator::with_log(p, &fs.direct, log_for(mode, &mut fs.warnings)).eval(cond)?;
                let base = take(&mut fs.direct);
                let on_false = guard(p, cond, false, &base)?;
                fs.direct = guard(p, cond, true, &base)?;
                drop(base);
                self.held += 1;
                self.analyze_block(then_block, func, fs, mode)?;
                let then_out = std::mem::replace(&mut fs.direct, on_false);
                if let Some(e) = else_block {
                    self.analyze_block(e, func, fs, mode)?;
                }
                self.held -= 1;
                fs.direct = then_out.join(&fs.direct)?;
            }
            StmtKind::While { cond, body } => self.analyze_while(s, cond, body, func, fs, mode)?,
            StmtKind::Block(b) => self.analyze_block(b, func, fs, mode)?,
            StmtKind::Label(_) | StmtKind::Skip => {}
            StmtKind::Goto(l) => fs.jump(Target::Label(func, l.clone()))?,
            StmtKind::Break => {
                let t = self.breaks.last().cloned().expect("validated break");
                fs.jump(t)?;
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    let rv = p.function(func).ret_var.expect("value return in non-void function");
                    fs.direct = assign(p, &LValue::Var(rv), e, &fs.direct, log_for(mode, &mut fs.warnings))?;
                }
                fs.jump(Target::FnEnd(func))?;
            }
            StmtKind::Call { callee: Callee::Direct { func: f, .. }, dest } => {
                self.call(f.expect("resolved call"), dest.as_ref(), s.loc, fs, mode)?;
            }
            StmtKind::Call { callee: Callee::Indirect { pointer }, dest } => {
                let base = take(&mut fs.direct);
                let mut acc = AbstractEnv::bottom();
                self.held += 2;
                for (k, f) in p.targets_of(*pointer).iter().enumerate() {
                    fs.direct = branch::indirect_input(p, *pointer, k, &base);
                    if fs.direct.is_bottom() {
                        continue;
                    }
                    self.call(*f, dest.as_ref(), s.loc, fs, mode)?;
                    acc = acc.join(&take(&mut fs.direct))?;
                }
                self.held -= 2;
                fs.direct = acc;
            }
            StmtKind::Switch { scrutinee, arms } => {
                Evaluator::with_log(p, &fs.direct, log_for(mode, &mut fs.warnings)).eval(scrutinee)?;
                let base = take(&mut fs.direct);
                let mut acc = AbstractEnv::bottom();
                self.held += 2;
                self.breaks.push(Target::SwitchExit(s.id));
                for (k, arm) in arms.iter().enumerate() {
                    fs.direct = branch::switch_arm_input(p, scrutinee, arms, k, &base)?;
                    self.analyze_block(&arm.body, func, fs, mode)?;
                    acc = acc.join(&take(&mut fs.direct))?;
                }
                self.breaks.pop();
                if arms.iter().all(|a| a.value.is_some()) {
                    let cases: Vec<i64> = arms.iter().filter_map(|a| a.value).collect();
                    acc = acc.join(&branch::no_case_matches(p, scrutinee, &cases, &base)?)?;
                }
                self.held -= 2;
                fs.direct = acc;
                fs.absorb(&Target::SwitchExit(s.id))?;
            }
        }
        Ok(())
    }

    /// Inline call of `f`, then copy its result to `dest`.
    fn call(&mut self, f: FuncId, dest: Option<&LValue>, loc: Location, fs: &mut FlowState, mode: Mode) -> Result<(), AnalysisError> {
        let p = self.program;
        let saved = std::mem::take(&mut self.breaks);
        let r = self.analyze_block(&p.function(f).body, f, fs, mode);
        self.breaks = saved;
        r?;
        fs.absorb(&Target::FnEnd(f))?;
        if let Some(d) = dest {
            let rv = p.function(f).ret_var.expect("call with destination returns a value");
            let read = Expr { loc, ty: p.var(rv).ty, kind: ExprKind::Read(LValue::Var(rv)) };
            fs.direct = assign(p, d, &read, &fs.direct, log_for(mode, &mut fs.warnings))?;
        }
        Ok(())
    }

    /// One application of the loop body from the states of `x` satisfying
    /// the condition.
    fn loop_body(&mut self, cond: &Expr, body: &Block, func: FuncId, x: &AbstractEnv, mode: Mode) -> Result<FlowState, AnalysisError> {
        let mut fs = FlowState::new(guard(self.program, cond, true, x)?);
        self.analyze_block(body, func, &mut fs, mode)?;
        Ok(fs)
    }

    fn phi(&mut self, cond: &Expr, body: &Block, func: FuncId, d0: &AbstractEnv, x: &AbstractEnv) -> Result<AbstractEnv, AnalysisError> {
        let fs = self.loop_body(cond, body, func, x, Mode::Iterate)?;
        Ok(d0.join(&fs.direct)?)
    }

    /// A post-fixpoint of `x ↦ d0 ⊔ body(guard(cond, x))`, computed in
    /// iteration mode.
    fn lfp(&mut self, s: &Stmt, cond: &Expr, body: &Block, func: FuncId, d0: &AbstractEnv) -> Result<AbstractEnv, AnalysisError> {
        let mut x = d0.clone();
        let mut i = 0;
        let mut y = loop {
            if i >= self.config.iteration_bound {
                return Err(AnalysisError::NonTermination { stmt: s.id, loc: s.loc, bound: self.config.iteration_bound });
            }
            let y = self.phi(cond, body, func, d0, &x)?;
            if y.leq(&x)? {
                break y;
            }
            x = if i < self.config.widening_delay { x.join(&y)? } else { x.widen(&y, &self.config.ladder)? };
            i += 1;
        };
        for _ in 0..self.config.narrowing_passes {
            let n = x.meet(&y)?;
            if x.leq(&n)? {
                break;
            }
            let y2 = self.phi(cond, body, func, d0, &n)?;
            if !y2.leq(&n)? {
                break;
            }
            x = n;
            y = y2;
        }
        Ok(x)
    }

    fn analyze_while(
        &mut self,
        s: &Stmt,
        cond: &Expr,
        body: &Block,
        func: FuncId,
        fs: &mut FlowState,
        mode: Mode,
    ) -> Result<(), AnalysisError> {
        let p = self.program;
        let d0 = fs.direct.clone();
        let outer = 2 + fs.pending.len();
        self.held += outer;
        self.breaks.push(Target::LoopExit(s.id));
        let mut inv = self.lfp(s, cond, body, func, &d0)?;
        if let Some(t) = self.tamper.as_mut() {
            if let Some(changed) = t(s.id, &inv) {
                inv = changed;
            }
        }
        // separate pass from the iteration above: re-apply the body once to
        // the final invariant and check inclusion
        let last = self.loop_body(cond, body, func, &inv, mode)?;
        if !d0.join(&last.direct)?.leq(&inv)? {
            return Err(AnalysisError::CheckFailed { stmt: s.id, loc: s.loc });
        }
        self.breaks.pop();
        self.held -= outer;
        if mode == Mode::Report {
            Evaluator::with_log(p, &inv, Some(&mut fs.warnings)).eval(cond)?;
            fs.warnings.merge(&last.warnings);
            Self::record(&mut self.invariants, s.id, &inv)?;
            if self.config.observe {
                Self::record(&mut self.observations, s.id, &inv)?;
            }
        }
        fs.direct = guard(p, cond, false, &inv)?;
        fs.merge_pending(last.pending)?;
        fs.absorb(&Target::LoopExit(s.id))?;
        Ok(())
    }

    fn analyze_dispatch(&mut self, s: &Stmt, fs: &mut FlowState, mode: Mode) -> Result<(), AnalysisError> {
        let p = self.program;
        if let StmtKind::Switch { scrutinee, .. } = &s.kind {
            Evaluator::with_log(p, &fs.direct, log_for(mode, &mut fs.warnings)).eval(scrutinee)?;
        }
        let base = take(&mut fs.direct);
        let n = branch_count(p, s);
        let outcomes = self.executor.as_mut().expect("executor").execute(s.id, &base, mode)?;
        if outcomes.len() != n {
            return Err(AnalysisError::Executor(format!("expected {n} branch results, got {}", outcomes.len())));
        }
        self.held += 2;
        let mut acc = AbstractEnv::bottom();
        for o in outcomes {
            acc = acc.join(&o.env)?;
            fs.warnings.merge(&o.warnings);
            for (id, e) in &o.invariants {
                Self::record(&mut self.invariants, *id, e)?;
            }
        }
        if let StmtKind::Switch { scrutinee, arms } = &s.kind {
            if arms.iter().all(|a| a.value.is_some()) {
                let cases: Vec<i64> = arms.iter().filter_map(|a| a.value).collect();
                acc = acc.join(&branch::no_case_matches(p, scrutinee, &cases, &base)?)?;
            }
        }
        self.held -= 2;
        fs.direct = acc;
        self.note(fs);
        Ok(())
    }

    /// Analyze branch `k` of dispatch statement `stmt` from `base`, as a
    /// worker does. Nested dispatch statements are analyzed sequentially.
    pub fn analyze_branch(&mut self, stmt: StmtId, k: usize, base: &AbstractEnv, mode: Mode) -> Result<BranchOutcome, AnalysisError> {
        let p = self.program;
        let start = Instant::now();
        let (func, s) = p.stmt(stmt).ok_or_else(|| AnalysisError::Executor(format!("no statement {stmt}")))?;
        if k >= branch_count(p, s) {
            return Err(AnalysisError::Executor(format!("statement {stmt} has no branch {k}")));
        }
        let mut fs = FlowState::new(AbstractEnv::bottom());
        match &s.kind {
            StmtKind::Switch { scrutinee, arms } => {
                fs.direct = branch::switch_arm_input(p, scrutinee, arms, k, base)?;
                self.breaks.push(Target::SwitchExit(s.id));
                self.analyze_block(&arms[k].body, func, &mut fs, mode)?;
                self.breaks.pop();
                fs.absorb(&Target::SwitchExit(s.id))?;
            }
            StmtKind::If { .. } => {
                let (conds, blocks) = branch::if_chain(s).expect("if statement");
                let mut env = base.clone();
                for c in &conds[..k] {
                    env = guard(p, c, false, &env)?;
                }
                if let Some(c) = conds.get(k) {
                    Evaluator::with_log(p, &env, log_for(mode, &mut fs.warnings)).eval(c)?;
                    env = guard(p, c, true, &env)?;
                }
                fs.direct = env;
                if let Some(b) = blocks[k] {
                    if !fs.direct.is_bottom() {
                        self.analyze_block(b, func, &mut fs, mode)?;
                    }
                }
            }
            StmtKind::Call { callee: Callee::Indirect { pointer }, dest } => {
                fs.direct = branch::indirect_input(p, *pointer, k, base);
                if !fs.direct.is_bottom() {
                    let f = p.targets_of(*pointer)[k];
                    self.call(f, dest.as_ref(), s.loc, &mut fs, mode)?;
                }
            }
            _ => unreachable!("branch_count is zero for other statements"),
        }
        debug_assert!(fs.pending.is_empty(), "branch escaped its dispatch statement");
        Ok(BranchOutcome {
            env: fs.direct,
            warnings: fs.warnings,
            invariants: std::mem::take(&mut self.invariants),
            micros: start.elapsed().as_micros() as u64,
        })
    }

    pub fn peak_retained(&self) -> usize {
        self.peak
    }
}

/// Analyze `p` with the default iteration and reporting scheme.
pub fn analyze_program(p: &ValidProgram, config: AnalysisConfig) -> Result<AnalysisResult, AnalysisError> {
    Analyzer::new(p, config).run(Mode::Report)
}

#[cfg(test)]
mod tests;
