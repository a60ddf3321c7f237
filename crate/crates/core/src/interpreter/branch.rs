//! Decomposition of dispatch statements into independently analyzable
//! branches.

use crate::absdomain::{guard, AbstractEnv, EnvError, Interval};
use crate::frontend::{BinOp, Block, Callee, Expr, ExprKind, FuncId, ScalarType, Stmt, StmtKind, ValidProgram};

/// Shape of a statement whose branches can be analyzed separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchKind {
    Switch,
    IfChain,
    IndirectCall,
}

pub fn dispatch_kind(s: &Stmt) -> Option<DispatchKind> {
    match &s.kind {
        StmtKind::Switch { .. } => Some(DispatchKind::Switch),
        StmtKind::If { .. } => Some(DispatchKind::IfChain),
        StmtKind::Call { callee: Callee::Indirect { .. }, .. } => Some(DispatchKind::IndirectCall),
        _ => None,
    }
}

/// Conditions and bodies of `if (c0) B0 else if (c1) B1 ... else Bn`. The
/// final body is `None` when there is no trailing `else`.
pub fn if_chain(s: &Stmt) -> Option<(Vec<&Expr>, Vec<Option<&Block>>)> {
    let mut conds = Vec::new();
    let mut blocks = Vec::new();
    let mut cur = s;
    loop {
        let StmtKind::If { cond, then_block, else_block } = &cur.kind else { return None };
        conds.push(cond);
        blocks.push(Some(then_block));
        match else_block {
            None => {
                blocks.push(None);
                break;
            }
            Some(b) => match b.stmts.as_slice() {
                [inner] if matches!(inner.kind, StmtKind::If { .. }) => cur = inner,
                _ => {
                    blocks.push(Some(b));
                    break;
                }
            },
        }
    }
    Some((conds, blocks))
}

/// Number of branches of a dispatch statement.
pub fn branch_count(p: &ValidProgram, s: &Stmt) -> usize {
    match &s.kind {
        StmtKind::Switch { arms, .. } => arms.len(),
        StmtKind::If { .. } => if_chain(s).map_or(0, |(c, _)| c.len() + 1),
        StmtKind::Call { callee: Callee::Indirect { pointer }, .. } => p.targets_of(*pointer).len(),
        _ => 0,
    }
}

/// `e == k`, located at `e`.
pub fn equals_const(e: &Expr, k: i64) -> Expr {
    let c = Expr { loc: e.loc, ty: ScalarType::Int, kind: ExprKind::Int(k) };
    Expr { loc: e.loc, ty: ScalarType::Int, kind: ExprKind::Binary(BinOp::Eq, Box::new(e.clone()), Box::new(c)) }
}

/// States of `env` in which `scrutinee` matches no case value.
pub fn no_case_matches(p: &ValidProgram, scrutinee: &Expr, cases: &[i64], env: &AbstractEnv) -> Result<AbstractEnv, EnvError> {
    if env.is_bottom() {
        return Ok(env.clone());
    }
    let v = crate::absdomain::eval(p, env, scrutinee)?;
    let Some((l0, h0)) = v.int_range() else { return Ok(AbstractEnv::bottom()) };
    let (mut lo, mut hi) = (l0 as i128, h0 as i128);
    while lo <= hi && cases.contains(&(lo as i64)) {
        lo += 1;
    }
    while hi >= lo && cases.contains(&(hi as i64)) {
        hi -= 1;
    }
    if lo > hi {
        return Ok(AbstractEnv::bottom());
    }
    if (lo, hi) == (l0 as i128, h0 as i128) {
        return Ok(env.clone());
    }
    match scrutinee.as_scalar_var() {
        Some(var) => Ok(env.set(&p.var(var).cell, v.meet(&Interval::int(lo as i64, hi as i64)))),
        None => Ok(env.clone()),
    }
}

/// Entry state of arm `k` of a switch.
pub fn switch_arm_input(
    p: &ValidProgram,
    scrutinee: &Expr,
    arms: &[crate::frontend::SwitchArm],
    k: usize,
    base: &AbstractEnv,
) -> Result<AbstractEnv, EnvError> {
    match arms[k].value {
        Some(v) => guard(p, &equals_const(scrutinee, v), true, base),
        None => {
            let cases: Vec<i64> = arms.iter().filter_map(|a| a.value).collect();
            no_case_matches(p, scrutinee, &cases, base)
        }
    }
}

/// Entry state for calling target `k` through `pointer`: ⊥ when the pointer
/// cannot hold that target.
pub fn indirect_input(p: &ValidProgram, pointer: usize, k: usize, base: &AbstractEnv) -> AbstractEnv {
    let cell = &p.var(pointer).cell;
    match base.get(cell) {
        Some(iv) if iv.contains_int(k as i64) => base.set(cell, Interval::int_const(k as i64)),
        _ => AbstractEnv::bottom(),
    }
}

/// Whether every branch of `s` keeps its jumps inside itself, so that a
/// branch's effect is fully described by its output state.
pub fn parallel_safe(s: &Stmt) -> bool {
    let bodies: Vec<&Block> = match &s.kind {
        StmtKind::Switch { arms, .. } => arms.iter().map(|a| &a.body).collect(),
        StmtKind::If { .. } => match if_chain(s) {
            Some((_, blocks)) => blocks.into_iter().flatten().collect(),
            None => return false,
        },
        StmtKind::Call { callee: Callee::Indirect { .. }, .. } => return true,
        _ => return false,
    };
    let switch = matches!(s.kind, StmtKind::Switch { .. });
    bodies.into_iter().all(|b| self_contained(b, switch))
}

fn self_contained(b: &Block, break_ok: bool) -> bool {
    let mut labels = Vec::new();
    b.walk(&mut |s| {
        if let StmtKind::Label(l) = &s.kind {
            labels.push(l.clone());
        }
    });
    fn check(b: &Block, loop_depth: usize, break_ok: bool, labels: &[String]) -> bool {
        b.stmts.iter().all(|s| match &s.kind {
            StmtKind::Return(_) => false,
            StmtKind::Goto(l) => labels.contains(l),
            StmtKind::Break => loop_depth > 0 || break_ok,
            StmtKind::While { body, .. } => check(body, loop_depth + 1, break_ok, labels),
            StmtKind::Switch { arms, .. } => arms.iter().all(|a| check(&a.body, loop_depth + 1, break_ok, labels)),
            _ => s.child_blocks().into_iter().all(|c| check(c, loop_depth, break_ok, labels)),
        })
    }
    check(b, 0, break_ok, &labels)
}

/// The function containing statement `id`, with the statement.
pub fn locate(p: &ValidProgram, id: crate::frontend::StmtId) -> Option<(FuncId, &Stmt)> {
    p.stmt(id)
}
