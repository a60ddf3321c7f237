//! Abstract evaluation of expressions, assignments and guards.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::frontend::{BinOp, Expr, ExprKind, LValue, Location, Program, ScalarType, UnOp};

use super::env::{AbstractEnv, EnvError};
use super::interval::{self as iv, Flags, IntBound, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarningKind {
    Overflow,
    DivByZero,
    ArrayOutOfBounds,
    AssertMayFail,
}

impl WarningKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            WarningKind::Overflow => "overflow",
            WarningKind::DivByZero => "div-by-zero",
            WarningKind::ArrayOutOfBounds => "array-out-of-bounds",
            WarningKind::AssertMayFail => "assert-may-fail",
        }
    }
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A possible runtime error, with the operand intervals that triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub loc: Location,
    pub kind: WarningKind,
    pub witness: Vec<Interval>,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.kind)?;
        for (i, w) in self.witness.iter().enumerate() {
            write!(f, "{}{w}", if i == 0 { " " } else { ", " })?;
        }
        Ok(())
    }
}

/// Warnings keyed by (location, kind); repeated reports at the same key
/// join their witnesses, so the log does not depend on reporting order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarningLog {
    entries: BTreeMap<(Location, WarningKind), Vec<Interval>>,
}

impl WarningLog {
    pub fn new() -> WarningLog {
        WarningLog::default()
    }

    pub fn report(&mut self, loc: Location, kind: WarningKind, witness: Vec<Interval>) {
        match self.entries.get_mut(&(loc, kind)) {
            None => {
                self.entries.insert((loc, kind), witness);
            }
            Some(old) => {
                for (o, w) in old.iter_mut().zip(&witness) {
                    if o.kind() == w.kind() {
                        *o = o.join(w);
                    }
                }
                if witness.len() > old.len() {
                    old.extend_from_slice(&witness[old.len()..]);
                }
            }
        }
    }

    pub fn push(&mut self, w: Warning) {
        self.report(w.loc, w.kind, w.witness);
    }

    pub fn merge(&mut self, other: &WarningLog) {
        for ((loc, kind), w) in &other.entries {
            self.report(*loc, *kind, w.clone());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Warnings sorted by (location, kind).
    pub fn to_vec(&self) -> Vec<Warning> {
        self.entries
            .iter()
            .map(|((loc, kind), w)| Warning { loc: *loc, kind: *kind, witness: w.clone() })
            .collect()
    }

    pub fn contains(&self, loc: Location, kind: WarningKind) -> bool {
        self.entries.contains_key(&(loc, kind))
    }

    /// Canonical bytes: count, then per warning line, column, kind code and
    /// witness intervals as single-cell canonical environments.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for ((loc, kind), w) in &self.entries {
            out.extend_from_slice(&loc.line.to_be_bytes());
            out.extend_from_slice(&loc.col.to_be_bytes());
            out.push(kind.code());
            out.extend_from_slice(&(w.len() as u16).to_be_bytes());
            for i in w {
                let cell = AbstractEnv::from_cells([("w", *i)]);
                cell.write_canonical(&mut out);
            }
        }
        out
    }

    /// Inverse of [`WarningLog::canonical_bytes`].
    pub fn from_canonical(bytes: &[u8]) -> Result<WarningLog, EnvError> {
        fn take<'b>(bytes: &'b [u8], pos: &mut usize, n: usize) -> Result<&'b [u8], EnvError> {
            let s = bytes.get(*pos..*pos + n).ok_or_else(|| EnvError::Decode("truncated warnings".into()))?;
            *pos += n;
            Ok(s)
        }
        let mut pos = 0;
        let n = u32::from_be_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap());
        let mut log = WarningLog::new();
        for _ in 0..n {
            let line = u32::from_be_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap());
            let col = u32::from_be_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap());
            let kind = match take(bytes, &mut pos, 1)?[0] {
                0 => WarningKind::Overflow,
                1 => WarningKind::DivByZero,
                2 => WarningKind::ArrayOutOfBounds,
                3 => WarningKind::AssertMayFail,
                _ => return Err(EnvError::Decode("bad warning kind".into())),
            };
            let m = u16::from_be_bytes(take(bytes, &mut pos, 2)?.try_into().unwrap());
            let mut witness = Vec::with_capacity(m as usize);
            for _ in 0..m {
                let (env, used) = AbstractEnv::read_canonical(&bytes[pos..])?;
                pos += used;
                witness.push(env.get("w").ok_or_else(|| EnvError::Decode("bad witness".into()))?);
            }
            log.entries.insert((Location::new(line, col), kind), witness);
        }
        if pos != bytes.len() {
            return Err(EnvError::Decode("trailing bytes".into()));
        }
        Ok(log)
    }

    pub fn from_warnings(ws: impl IntoIterator<Item = Warning>) -> WarningLog {
        let mut log = WarningLog::new();
        for w in ws {
            log.push(w);
        }
        log
    }
}

/// Expression evaluation over an abstract environment. Warnings are only
/// recorded when a log is attached.
pub struct Evaluator<'a> {
    pub program: &'a Program,
    pub env: &'a AbstractEnv,
    pub log: Option<&'a mut WarningLog>,
}

fn cell_of(program: &Program, var: usize) -> &Arc<str> {
    &program.var(var).cell
}

/// Truth values an integer interval may take: (may be false, may be true).
fn truth(v: &Interval) -> (bool, bool) {
    if v.is_empty() {
        return (false, false);
    }
    (v.contains_zero(), !v.is_zero())
}

fn from_truth(may_false: bool, may_true: bool) -> Interval {
    match (may_false, may_true) {
        (true, true) => Interval::boolean(),
        (true, false) => Interval::int_const(0),
        (false, true) => Interval::int_const(1),
        (false, false) => Interval::Empty(ScalarType::Int),
    }
}

/// Possible outcomes of `a op b` for a comparison operator.
fn compare(op: BinOp, a: &Interval, b: &Interval) -> (bool, bool) {
    if a.is_empty() || b.is_empty() {
        return (false, false);
    }
    match op {
        BinOp::Lt => lt(a, b),
        BinOp::Le => {
            let (f, t) = lt(b, a);
            (t, f)
        }
        BinOp::Gt => lt(b, a),
        BinOp::Ge => {
            let (f, t) = lt(a, b);
            (t, f)
        }
        BinOp::Eq => eq(a, b),
        BinOp::Ne => {
            let (f, t) = eq(a, b);
            (t, f)
        }
        _ => unreachable!("not a comparison"),
    }
}

fn lt(a: &Interval, b: &Interval) -> (bool, bool) {
    match (*a, *b) {
        (Interval::Int(..), Interval::Int(..)) => {
            let (al, ah) = a.int_range().unwrap();
            let (bl, bh) = b.int_range().unwrap();
            (ah >= bl, al < bh)
        }
        _ => {
            let (al, ah) = a.float_range().unwrap();
            let (bl, bh) = b.float_range().unwrap();
            (ah >= bl, al < bh)
        }
    }
}

fn eq(a: &Interval, b: &Interval) -> (bool, bool) {
    match (*a, *b) {
        (Interval::Int(..), Interval::Int(..)) => {
            let (al, ah) = a.int_range().unwrap();
            let (bl, bh) = b.int_range().unwrap();
            let may_eq = al <= bh && bl <= ah;
            (!(al == ah && bl == bh && al == bl), may_eq)
        }
        _ => {
            let (al, ah) = a.float_range().unwrap();
            let (bl, bh) = b.float_range().unwrap();
            let may_eq = al <= bh && bl <= ah;
            (!(al == ah && bl == bh && al == bl), may_eq)
        }
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(program: &'a Program, env: &'a AbstractEnv) -> Self {
        Evaluator { program, env, log: None }
    }

    pub fn with_log(program: &'a Program, env: &'a AbstractEnv, log: Option<&'a mut WarningLog>) -> Self {
        Evaluator { program, env, log }
    }

    fn warn(&mut self, loc: Location, kind: WarningKind, witness: Vec<Interval>) {
        if let Some(log) = self.log.as_deref_mut() {
            log.report(loc, kind, witness);
        }
    }

    fn flags(&mut self, loc: Location, flags: Flags, divisor: Interval, witness: Vec<Interval>) {
        if flags.div_by_zero {
            self.warn(loc, WarningKind::DivByZero, vec![divisor]);
        }
        if flags.overflow {
            self.warn(loc, WarningKind::Overflow, witness);
        }
    }

    /// Value of an array index, with a bounds warning when it may fall
    /// outside the array.
    pub fn index(&mut self, var: usize, idx: &Expr) -> Result<Interval, EnvError> {
        let i = self.eval(idx)?;
        let len = self.program.var(var).array_len.unwrap_or(1) as i64;
        if !i.is_empty() && !i.leq(&Interval::int(0, len - 1)) {
            self.warn(idx.loc, WarningKind::ArrayOutOfBounds, vec![i]);
        }
        Ok(i)
    }

    pub fn read(&mut self, l: &LValue) -> Result<Interval, EnvError> {
        if self.env.is_bottom() {
            return Ok(Interval::Empty(self.program.var(l.var()).ty));
        }
        if let LValue::Index(v, idx) = l {
            self.index(*v, idx)?;
        }
        let cell = cell_of(self.program, l.var());
        self.env.get(cell).ok_or_else(|| EnvError::Unbound(cell.clone()))
    }

    pub fn eval(&mut self, e: &Expr) -> Result<Interval, EnvError> {
        if self.env.is_bottom() {
            return Ok(Interval::Empty(e.ty));
        }
        Ok(match &e.kind {
            ExprKind::Read(l) => self.read(l)?,
            ExprKind::Int(v) => Interval::int_const(*v),
            ExprKind::Float(v) => Interval::float_const(*v),
            ExprKind::Unary(op, a) => {
                let x = self.eval(a)?;
                if x.is_empty() {
                    return Ok(Interval::Empty(e.ty));
                }
                match op {
                    UnOp::Not => {
                        let (f, t) = truth(&x);
                        from_truth(t, f)
                    }
                    UnOp::Neg => match x {
                        Interval::Int(..) => {
                            let mut fl = Flags::default();
                            let r = iv::int_neg(x.int_range().unwrap(), &mut fl);
                            self.flags(e.loc, fl, x, vec![x]);
                            r
                        }
                        _ => iv::float_neg(x.float_range().unwrap()),
                    },
                }
            }
            ExprKind::Cast(ty, a) => {
                let x = self.eval(a)?;
                if x.is_empty() {
                    return Ok(Interval::Empty(*ty));
                }
                match (x, ty) {
                    (Interval::Int(..), ScalarType::Float) => iv::int_to_float(x.int_range().unwrap()),
                    (Interval::Float(..), ScalarType::Int) => {
                        let mut fl = Flags::default();
                        let r = iv::float_to_int(x.float_range().unwrap(), &mut fl);
                        self.flags(e.loc, fl, x, vec![x]);
                        r
                    }
                    _ => x,
                }
            }
            ExprKind::Binary(op, a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                if x.is_empty() || y.is_empty() {
                    return Ok(Interval::Empty(e.ty));
                }
                if op.is_comparison() {
                    let (f, t) = compare(*op, &x, &y);
                    return Ok(from_truth(f, t));
                }
                if op.is_logical() {
                    let (xf, xt) = truth(&x);
                    let (yf, yt) = truth(&y);
                    return Ok(match op {
                        BinOp::And => from_truth(xf || yf, xt && yt),
                        _ => from_truth(xf && yf, xt || yt),
                    });
                }
                let mut fl = Flags::default();
                let r = match (x, y) {
                    (Interval::Int(..), Interval::Int(..)) => {
                        let (p, q) = (x.int_range().unwrap(), y.int_range().unwrap());
                        match op {
                            BinOp::Add => iv::int_add(p, q, &mut fl),
                            BinOp::Sub => iv::int_sub(p, q, &mut fl),
                            BinOp::Mul => iv::int_mul(p, q, &mut fl),
                            BinOp::Div => iv::int_div(p, q, &mut fl),
                            BinOp::Rem => iv::int_rem(p, q, &mut fl),
                            _ => unreachable!(),
                        }
                    }
                    _ => {
                        let (p, q) = (x.float_range().unwrap(), y.float_range().unwrap());
                        match op {
                            BinOp::Add => iv::float_add(p, q, &mut fl),
                            BinOp::Sub => iv::float_sub(p, q, &mut fl),
                            BinOp::Mul => iv::float_mul(p, q, &mut fl),
                            BinOp::Div => iv::float_div(p, q, &mut fl),
                            _ => unreachable!("no float remainder"),
                        }
                    }
                };
                self.flags(e.loc, fl, y, vec![x, y]);
                r
            }
        })
    }
}

/// Evaluate without recording warnings.
pub fn eval(program: &Program, env: &AbstractEnv, e: &Expr) -> Result<Interval, EnvError> {
    Evaluator::new(program, env).eval(e)
}

/// `l = v` for an already evaluated right-hand side: strong update of a
/// scalar, weak update of the smashed array cell.
pub fn store(program: &Program, env: &AbstractEnv, l: &LValue, v: Interval) -> Result<AbstractEnv, EnvError> {
    if env.is_bottom() {
        return Ok(env.clone());
    }
    let cell = cell_of(program, l.var());
    match l {
        LValue::Var(_) => Ok(env.set(cell, v)),
        LValue::Index(..) => {
            let old = env.get(cell).ok_or_else(|| EnvError::Unbound(cell.clone()))?;
            Ok(env.set(cell, old.join(&v)))
        }
    }
}

/// Abstract assignment `l = e`, reporting possible runtime errors to `log`.
pub fn assign(
    program: &Program,
    l: &LValue,
    e: &Expr,
    env: &AbstractEnv,
    log: Option<&mut WarningLog>,
) -> Result<AbstractEnv, EnvError> {
    if env.is_bottom() {
        return Ok(env.clone());
    }
    let mut ev = Evaluator::with_log(program, env, log);
    let v = ev.eval(e)?;
    if let LValue::Index(var, idx) = l {
        ev.index(*var, idx)?;
    }
    store(program, env, l, v)
}

/// Over-approximation of the states of `env` in which `e` evaluates to
/// `branch` (non-zero for true).
pub fn guard(program: &Program, e: &Expr, branch: bool, env: &AbstractEnv) -> Result<AbstractEnv, EnvError> {
    if env.is_bottom() {
        return Ok(env.clone());
    }
    match &e.kind {
        ExprKind::Unary(UnOp::Not, a) => guard(program, a, !branch, env),
        ExprKind::Binary(BinOp::And, a, b) => {
            let ta = guard(program, a, true, env)?;
            if branch {
                guard(program, b, true, &ta)
            } else {
                let fa = guard(program, a, false, env)?;
                fa.join(&guard(program, b, false, &ta)?)
            }
        }
        ExprKind::Binary(BinOp::Or, a, b) => {
            let fa = guard(program, a, false, env)?;
            if branch {
                let ta = guard(program, a, true, env)?;
                ta.join(&guard(program, b, true, &fa)?)
            } else {
                guard(program, b, false, &fa)
            }
        }
        ExprKind::Binary(op, a, b) if op.is_comparison() => {
            let op = if branch { *op } else { op.negated().unwrap() };
            refine_comparison(program, op, a, b, env)
        }
        _ => {
            let v = eval(program, env, e)?;
            let (may_false, may_true) = truth(&v);
            if (branch && !may_true) || (!branch && !may_false) {
                return Ok(AbstractEnv::bottom());
            }
            if let Some(var) = e.as_scalar_var() {
                let zero = match e.ty {
                    ScalarType::Int => Interval::int_const(0),
                    ScalarType::Float => Interval::float_const(0.0),
                };
                let op = if branch { BinOp::Ne } else { BinOp::Eq };
                let r = restrict(&v, op, &zero);
                return Ok(env.set(cell_of(program, var), r));
            }
            Ok(env.clone())
        }
    }
}

fn refine_comparison(
    program: &Program,
    op: BinOp,
    a: &Expr,
    b: &Expr,
    env: &AbstractEnv,
) -> Result<AbstractEnv, EnvError> {
    let x = eval(program, env, a)?;
    let y = eval(program, env, b)?;
    let (_, may_hold) = compare(op, &x, &y);
    if !may_hold {
        return Ok(AbstractEnv::bottom());
    }
    let mut out = env.clone();
    if let Some(v) = a.as_scalar_var() {
        let cell = cell_of(program, v);
        let cur = out.get(cell).ok_or_else(|| EnvError::Unbound(cell.clone()))?;
        out = out.set(cell, cur.meet(&restrict(&x, op, &y)));
    }
    if let Some(v) = b.as_scalar_var() {
        let cell = cell_of(program, v);
        if out.is_bottom() {
            return Ok(out);
        }
        let cur = out.get(cell).ok_or_else(|| EnvError::Unbound(cell.clone()))?;
        out = out.set(cell, cur.meet(&restrict(&y, op.mirrored(), &x)));
    }
    Ok(out)
}

/// The values of `x` that satisfy `x op v` for some `v` in `y`.
pub fn restrict(x: &Interval, op: BinOp, y: &Interval) -> Interval {
    if x.is_empty() || y.is_empty() {
        return Interval::Empty(x.kind());
    }
    match (*x, *y) {
        (Interval::Int(..), Interval::Int(..)) => {
            let (yl, yh) = y.int_range().unwrap();
            let fin = IntBound::Finite;
            let c = |lo: i128, hi: i128| -> Interval {
                if lo > i64::MAX as i128 || hi < i64::MIN as i128 || lo > hi {
                    Interval::Empty(ScalarType::Int)
                } else {
                    Interval::int(lo.max(i64::MIN as i128) as i64, hi.min(i64::MAX as i128) as i64)
                }
            };
            let bound = match op {
                BinOp::Lt => c(i64::MIN as i128, yh as i128 - 1),
                BinOp::Le => c(i64::MIN as i128, yh as i128),
                BinOp::Gt => c(yl as i128 + 1, i64::MAX as i128),
                BinOp::Ge => c(yl as i128, i64::MAX as i128),
                BinOp::Eq => Interval::int(yl, yh),
                BinOp::Ne => {
                    if yl != yh {
                        return *x;
                    }
                    let Interval::Int(lo, hi) = *x else { unreachable!() };
                    let lo = if lo == fin(yl) { fin(yl.saturating_add(1)) } else { lo };
                    let hi = if hi == fin(yl) { fin(yl.saturating_sub(1)) } else { hi };
                    if x.int_range() == Some((yl, yl)) {
                        return Interval::Empty(ScalarType::Int);
                    }
                    return Interval::int_bounds(lo, hi);
                }
                _ => unreachable!("not a comparison"),
            };
            x.meet(&bound)
        }
        _ => {
            let (yl, yh) = y.float_range().unwrap();
            let bound = match op {
                BinOp::Lt => Interval::float(f64::NEG_INFINITY, yh.next_down()),
                BinOp::Le => Interval::float(f64::NEG_INFINITY, yh),
                BinOp::Gt => Interval::float(yl.next_up(), f64::INFINITY),
                BinOp::Ge => Interval::float(yl, f64::INFINITY),
                BinOp::Eq => Interval::float(yl, yh),
                BinOp::Ne => {
                    if yl != yh {
                        return *x;
                    }
                    let Interval::Float(lo, hi) = *x else { unreachable!() };
                    if lo == yl && hi == yl {
                        return Interval::Empty(ScalarType::Float);
                    }
                    let lo = if lo == yl { lo.next_up() } else { lo };
                    let hi = if hi == yl { hi.next_down() } else { hi };
                    return Interval::float(lo, hi);
                }
                _ => unreachable!("not a comparison"),
            };
            x.meet(&bound)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{compile, StmtKind, ValidProgram};

    fn first_assign(p: &ValidProgram) -> (LValue, Expr) {
        let mut found = None;
        p.for_each_stmt(|_, s| {
            if let (None, StmtKind::Assign { target, value }) = (&found, &s.kind) {
                found = Some((target.clone(), value.clone()));
            }
        });
        found.unwrap()
    }

    fn first_cond(p: &ValidProgram) -> Expr {
        let mut found = None;
        p.for_each_stmt(|_, s| {
            if let (None, StmtKind::If { cond, .. }) = (&found, &s.kind) {
                found = Some(cond.clone());
            }
        });
        found.unwrap()
    }

    #[test]
    fn assign_shift() {
        let p = compile("int x; void main() { x = x + 1; }").unwrap();
        let (l, e) = first_assign(&p);
        let d = AbstractEnv::from_cells([("x", Interval::int(0, 2))]);
        let r = assign(&p, &l, &e, &d, None).unwrap();
        assert_eq!(r.get("x"), Some(Interval::int(1, 3)));
    }

    #[test]
    fn weak_update_on_arrays() {
        let p = compile("int t[10]; int i; void main() { t[i] = 5; }").unwrap();
        let (l, e) = first_assign(&p);
        let d = AbstractEnv::from_cells([("t", Interval::int(0, 0)), ("i", Interval::int(0, 9))]);
        let mut log = WarningLog::new();
        let r = assign(&p, &l, &e, &d, Some(&mut log)).unwrap();
        assert_eq!(r.get("t"), Some(Interval::int(0, 5)));
        assert!(log.is_empty());
        let d = d.set(&"i".into(), Interval::int(0, 10));
        assign(&p, &l, &e, &d, Some(&mut log)).unwrap();
        assert_eq!(log.to_vec()[0].kind, WarningKind::ArrayOutOfBounds);
    }

    #[test]
    fn overflow_clamps_and_warns() {
        let p = compile("int x; void main() { x = x + 1; }").unwrap();
        let (l, e) = first_assign(&p);
        let d = AbstractEnv::from_cells([("x", Interval::int(i64::MAX - 1, i64::MAX))]);
        let mut log = WarningLog::new();
        let r = assign(&p, &l, &e, &d, Some(&mut log)).unwrap();
        assert_eq!(r.get("x"), Some(Interval::int_const(i64::MAX)));
        assert_eq!(log.to_vec()[0].kind, WarningKind::Overflow);
    }

    #[test]
    fn guard_examples() {
        let p = compile("int x; void main() { if (x < 5) { } }").unwrap();
        let c = first_cond(&p);
        let d = AbstractEnv::from_cells([("x", Interval::int(0, 10))]);
        assert_eq!(guard(&p, &c, true, &d).unwrap().get("x"), Some(Interval::int(0, 4)));
        assert_eq!(guard(&p, &c, false, &d).unwrap().get("x"), Some(Interval::int(5, 10)));
        let d = AbstractEnv::from_cells([("x", Interval::int(6, 10))]);
        assert!(guard(&p, &c, true, &d).unwrap().is_bottom());
    }

    #[test]
    fn guard_conjunction_and_negation() {
        let p = compile("int x; int y; void main() { if (!(x < 2) && y != 3) { } }").unwrap();
        let c = first_cond(&p);
        let d = AbstractEnv::from_cells([("x", Interval::int(0, 10)), ("y", Interval::int(3, 8))]);
        let t = guard(&p, &c, true, &d).unwrap();
        assert_eq!(t.get("x"), Some(Interval::int(2, 10)));
        assert_eq!(t.get("y"), Some(Interval::int(4, 8)));
        let f = guard(&p, &c, false, &d).unwrap();
        assert_eq!(f.get("x"), Some(Interval::int(0, 10)));
    }

    #[test]
    fn guard_between_variables() {
        let p = compile("int x; int y; void main() { if (x < y) { } }").unwrap();
        let c = first_cond(&p);
        let d = AbstractEnv::from_cells([("x", Interval::int(0, 10)), ("y", Interval::int(2, 5))]);
        let t = guard(&p, &c, true, &d).unwrap();
        assert_eq!(t.get("x"), Some(Interval::int(0, 4)));
        assert_eq!(t.get("y"), Some(Interval::int(2, 5)));
    }

    #[test]
    fn division_warnings() {
        let p = compile("int x; int y; void main() { y = 100 / x; }").unwrap();
        let (l, e) = first_assign(&p);
        let mut log = WarningLog::new();
        let d = AbstractEnv::from_cells([("x", Interval::int(0, 10)), ("y", Interval::int(0, 0))]);
        assign(&p, &l, &e, &d, Some(&mut log)).unwrap();
        assert!(log.contains(e.loc, WarningKind::DivByZero));
        let mut log = WarningLog::new();
        let d = d.set(&"x".into(), Interval::int(1, 10));
        let r = assign(&p, &l, &e, &d, Some(&mut log)).unwrap();
        assert!(log.is_empty());
        assert_eq!(r.get("y"), Some(Interval::int(10, 100)));
    }

    #[test]
    fn warning_log_joins_witnesses() {
        let loc = Location::new(1, 1);
        let mut a = WarningLog::new();
        a.report(loc, WarningKind::Overflow, vec![Interval::int(0, 1)]);
        a.report(loc, WarningKind::Overflow, vec![Interval::int(5, 6)]);
        assert_eq!(a.to_vec()[0].witness, vec![Interval::int(0, 6)]);
    }

    #[test]
    fn warning_log_bytes_round_trip() {
        let mut a = WarningLog::new();
        a.report(Location::new(3, 9), WarningKind::DivByZero, vec![Interval::int(-1, 1)]);
        a.report(Location::new(1, 2), WarningKind::Overflow, vec![Interval::float(0.5, f64::INFINITY), Interval::top(ScalarType::Int)]);
        let b = WarningLog::from_canonical(&a.canonical_bytes()).unwrap();
        assert_eq!(a, b);
        assert!(WarningLog::from_canonical(&[0, 0, 0, 1]).is_err());
    }
}
