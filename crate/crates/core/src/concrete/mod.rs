//! Concrete semantics of the language, used as the soundness oracle.
//!
//! Two independent executors are provided: [`run_sampled`] follows the
//! syntax-directed semantics for one run with random inputs, and
//! [`enumerate_reachable`] explores every reachable state of a flattened
//! control-flow graph.

pub mod cfg;
pub mod eval;
pub mod exec;
pub mod state;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frontend::{ExprKind, LValue, Program, StmtId, ValidProgram};

pub use cfg::{lower, Cfg, Instr};
pub use eval::eval_expr;
pub use exec::{BudgetExhausted, LabelBank, Machine};
pub use state::{ErrorKind, ErrorRecord, Slot, State, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcreteError {
    #[error("more than {bound} reachable configurations")]
    StateSpaceTooLarge { bound: usize },
    #[error("float inputs cannot be enumerated")]
    FloatInput,
}

/// Bind the globals to their initializers (or zero).
pub fn initial_state(p: &Program, errors: &mut Vec<ErrorRecord>) -> State {
    let mut st = State::default();
    for g in &p.globals {
        st.declare(p, g.var);
        if let Some(init) = &g.init {
            let v = eval_expr(p, &st, init, errors);
            eval::write(p, &mut st, &LValue::Var(g.var), v, errors);
        }
    }
    st
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Terminated,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct SampledRun {
    /// Entry state of every executed statement, in execution order.
    pub trace: Vec<(StmtId, State)>,
    pub errors: Vec<ErrorRecord>,
    /// State at program exit, when the run terminated normally.
    pub final_state: Option<State>,
    pub outcome: RunOutcome,
    pub steps: u64,
}

/// Execute once with inputs drawn from a generator seeded by `seed`,
/// stopping after `step_budget` statements.
pub fn run_sampled(p: &ValidProgram, seed: u64, step_budget: u64) -> SampledRun {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Machine::new(p, rng, step_budget, true);
    let r = m.run();
    let steps = m.steps();
    let (final_state, outcome) = match r {
        Ok(s) => (s, RunOutcome::Terminated),
        Err(BudgetExhausted) => (None, RunOutcome::BudgetExhausted),
    };
    SampledRun { trace: m.trace, errors: m.errors, final_state, outcome, steps }
}

/// Exact reachable states of a program.
#[derive(Debug, Clone, Default)]
pub struct Reachable {
    /// Entry states per statement (for loops: states at the loop head).
    pub at: BTreeMap<StmtId, BTreeSet<State>>,
    /// States at program exit.
    pub finals: BTreeSet<State>,
    /// Every distinct runtime error.
    pub errors: BTreeSet<ErrorRecord>,
    /// Number of distinct (pc, state) configurations explored.
    pub configurations: usize,
}

/// Default bound on explored configurations.
pub const DEFAULT_STATE_BOUND: usize = 1_000_000;

/// Breadth-first exploration of all (pc, state) configurations.
pub fn enumerate_reachable(p: &ValidProgram, bound: usize) -> Result<Reachable, ConcreteError> {
    let cfg = lower(p);
    let mut out = Reachable::default();
    let mut errors = Vec::new();
    let init = initial_state(p, &mut errors);
    out.errors.extend(errors.drain(..));
    let mut seen: HashSet<(usize, State)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((cfg.entry, init.clone()));
    queue.push_back((cfg.entry, init));
    while let Some((pc, st)) = queue.pop_front() {
        let mut succ: Vec<(usize, State)> = Vec::with_capacity(1);
        match &cfg.instrs[pc] {
            Instr::Mark(id) => {
                out.at.entry(*id).or_default().insert(st.clone());
                succ.push((pc + 1, st));
            }
            Instr::Declare(vars) => {
                let mut st = st;
                for v in vars {
                    st.declare(p, *v);
                }
                succ.push((pc + 1, st));
            }
            Instr::Undeclare(vars) => {
                let mut st = st;
                for v in vars {
                    st.undeclare(p, *v);
                }
                succ.push((pc + 1, st));
            }
            Instr::Assign(l, e) => {
                let mut st = st;
                eval::assign(p, &mut st, l, e, &mut errors);
                succ.push((pc + 1, st));
            }
            Instr::CopyReturn { dest, ret } => {
                let mut st = st;
                let v = st.scalar(&p.var(*ret).cell).expect("bound return cell");
                eval::write(p, &mut st, dest, v, &mut errors);
                succ.push((pc + 1, st));
            }
            Instr::SetInt(var, v) => {
                let mut st = st;
                eval::write(p, &mut st, &LValue::Var(*var), Value::Int(*v), &mut errors);
                succ.push((pc + 1, st));
            }
            Instr::Input { target, lo, hi } => match (&lo.kind, &hi.kind) {
                (ExprKind::Int(a), ExprKind::Int(b)) => {
                    if (*b as i128 - *a as i128) >= bound as i128 {
                        return Err(ConcreteError::StateSpaceTooLarge { bound });
                    }
                    for v in *a..=*b {
                        let mut s2 = st.clone();
                        eval::write(p, &mut s2, target, Value::Int(v), &mut errors);
                        succ.push((pc + 1, s2));
                    }
                }
                (ExprKind::Float(a), ExprKind::Float(b)) if a == b => {
                    let mut st = st;
                    eval::write(p, &mut st, target, Value::Float(*a), &mut errors);
                    succ.push((pc + 1, st));
                }
                _ => return Err(ConcreteError::FloatInput),
            },
            Instr::Assert { cond, stmt } => {
                if eval_expr(p, &st, cond, &mut errors).is_true() {
                    succ.push((pc + 1, st));
                } else {
                    let loc = p.stmt(*stmt).expect("assert statement").1.loc;
                    errors.push(ErrorRecord { kind: ErrorKind::AssertFailure, loc, values: vec![] });
                }
            }
            Instr::Branch { cond, then_pc, else_pc } => {
                let c = eval_expr(p, &st, cond, &mut errors).is_true();
                succ.push((if c { *then_pc } else { *else_pc }, st));
            }
            Instr::Switch { scrutinee, cases, default } => {
                let v = eval_expr(p, &st, scrutinee, &mut errors).as_int();
                let to = cases.iter().find(|(k, _)| *k == v).map_or(*default, |(_, pc)| *pc);
                succ.push((to, st));
            }
            Instr::Dispatch { pointer, targets } => {
                let k = st.scalar(&p.var(*pointer).cell).expect("bound pointer").as_int();
                succ.push((targets[k as usize], st));
            }
            Instr::Jump(to) => succ.push((*to, st)),
            Instr::Halt => {
                out.finals.insert(st);
            }
        }
        out.errors.extend(errors.drain(..));
        for c in succ {
            if !seen.contains(&c) {
                if seen.len() >= bound {
                    return Err(ConcreteError::StateSpaceTooLarge { bound });
                }
                seen.insert(c.clone());
                queue.push_back(c);
            }
        }
    }
    out.configurations = seen.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile;

    fn states(r: &Reachable) -> Vec<i64> {
        r.finals.iter().map(|s| s.scalar("x").unwrap().as_int()).collect()
    }

    #[test]
    fn expression_examples() {
        let p = compile("int x; int y; void main() { x = x + 1; y = x / y; }").unwrap();
        let mut st = State::default();
        st.cells.insert("x".into(), Slot::Scalar(Value::Int(3)));
        st.cells.insert("y".into(), Slot::Scalar(Value::Int(0)));
        let mut errs = Vec::new();
        let crate::frontend::StmtKind::Assign { value, .. } = &p.function(p.entry).body.stmts[0].kind else {
            panic!()
        };
        assert_eq!(eval_expr(&p, &st, value, &mut errs), Value::Int(4));
        assert!(errs.is_empty());
        st.cells.insert("x".into(), Slot::Scalar(Value::Int(i64::MAX)));
        assert_eq!(eval_expr(&p, &st, value, &mut errs), Value::Int(i64::MAX));
        assert_eq!(errs[0].kind, ErrorKind::Overflow);
        let crate::frontend::StmtKind::Assign { value, .. } = &p.function(p.entry).body.stmts[1].kind else {
            panic!()
        };
        st.cells.insert("x".into(), Slot::Scalar(Value::Int(1)));
        let mut errs = Vec::new();
        assert_eq!(eval_expr(&p, &st, value, &mut errs), Value::Int(0));
        assert_eq!(errs[0].kind, ErrorKind::DivByZero);
    }

    #[test]
    fn goto_moves_state_into_bank() {
        let p = compile("int x; void main() { goto L; x = 2; L: ; }").unwrap();
        let mut m = Machine::new(&p, ChaCha8Rng::seed_from_u64(0), 100, false);
        let mut st = State::default();
        st.cells.insert("x".into(), Slot::Scalar(Value::Int(1)));
        let mut bank = LabelBank::new();
        let goto = &p.function(p.entry).body.stmts[0];
        let out = m.exec_stmt(goto, p.entry, Some(st.clone()), &mut bank).unwrap();
        assert!(out.is_none());
        assert_eq!(bank.get(&crate::frontend::Target::Label(p.entry, "L".into())), Some(&st));
    }

    #[test]
    fn sampled_counting_loop() {
        let p = compile("int x; void main() { x = 0; while (x < 3) { x = x + 1; } }").unwrap();
        let r = run_sampled(&p, 0, 1000);
        assert_eq!(r.outcome, RunOutcome::Terminated);
        assert_eq!(r.final_state.unwrap().scalar("x"), Some(Value::Int(3)));
    }

    #[test]
    fn sampled_infinite_loop_exhausts_budget() {
        let p = compile("int i; void main() { while (1) { i = (i + 1) % 8; } }").unwrap();
        let r = run_sampled(&p, 0, 100_000);
        assert_eq!(r.outcome, RunOutcome::BudgetExhausted);
    }

    #[test]
    fn sampled_assert_failure() {
        let p = compile("void main() { assert(0); }").unwrap();
        let r = run_sampled(&p, 0, 100);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].kind, ErrorKind::AssertFailure);
    }

    #[test]
    fn enumerate_input_range() {
        let p = compile("int x; void main() { input(x, 0, 2); x = x + 1; }").unwrap();
        let r = enumerate_reachable(&p, DEFAULT_STATE_BOUND).unwrap();
        assert_eq!(states(&r), vec![1, 2, 3]);
    }

    #[test]
    fn enumerate_loop_head() {
        let p = compile("int x; void main() { x = 0; while (x < 2) { x = x + 1; } }").unwrap();
        let r = enumerate_reachable(&p, DEFAULT_STATE_BOUND).unwrap();
        let w = p.function(p.entry).body.stmts[1].id;
        let head: Vec<i64> = r.at[&w].iter().map(|s| s.scalar("x").unwrap().as_int()).collect();
        assert_eq!(head, vec![0, 1, 2]);
    }

    #[test]
    fn enumerate_too_large() {
        let p = compile("int x; int y; void main() { input(x, 0, 9999); input(y, 0, 9999); }").unwrap();
        assert!(matches!(enumerate_reachable(&p, DEFAULT_STATE_BOUND), Err(ConcreteError::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn enumerate_float_input_rejected() {
        let p = compile("float f; void main() { input(f, 0.0, 1.0); }").unwrap();
        assert_eq!(enumerate_reachable(&p, 1000).unwrap_err(), ConcreteError::FloatInput);
    }

    #[test]
    fn executors_agree_on_calls_and_gotos() {
        let src = "int x; int r; fnptr fp = {inc, dbl};
            int inc() { return x + 1; }
            int dbl() { if (x > 2) { return x * 2; } return x; }
            void main() {
                input(x, 0, 4);
                { int t; t = x; if (t == 3) { goto out; } x = t + 1; }
                if (x % 2 == 0) { fp = dbl; }
                r = (*fp)();
                switch (x) { case 1: r = r + 10; break; default: r = r - 1; }
                out: ;
            }";
        let p = compile(src).unwrap();
        let all = enumerate_reachable(&p, DEFAULT_STATE_BOUND).unwrap();
        for seed in 0..40 {
            let run = run_sampled(&p, seed, 10_000);
            assert!(all.finals.contains(run.final_state.as_ref().unwrap()));
            for (id, st) in &run.trace {
                assert!(all.at[id].contains(st), "stmt {id}: {st}");
            }
        }
    }
}
