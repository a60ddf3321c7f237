use crate::absdomain::interval::{concrete_float_clamp, concrete_float_to_int, concrete_int_div, concrete_int_rem};
use crate::frontend::{BinOp, Expr, ExprKind, LValue, Program, UnOp};

use super::state::{ErrorKind, ErrorRecord, Slot, State, Value};

/// Evaluate `e` in `state`. Runtime errors are appended to `errors` and
/// evaluation continues with the clamped value. `&&` and `||` short-circuit.
pub fn eval_expr(program: &Program, state: &State, e: &Expr, errors: &mut Vec<ErrorRecord>) -> Value {
    match &e.kind {
        ExprKind::Int(v) => Value::Int(*v),
        ExprKind::Float(v) => Value::Float(*v),
        ExprKind::Read(l) => read(program, state, l, errors),
        ExprKind::Unary(UnOp::Not, a) => Value::Int(!eval_expr(program, state, a, errors).is_true() as i64),
        ExprKind::Unary(UnOp::Neg, a) => match eval_expr(program, state, a, errors) {
            Value::Int(v) => match v.checked_neg() {
                Some(r) => Value::Int(r),
                None => {
                    errors.push(ErrorRecord { kind: ErrorKind::Overflow, loc: e.loc, values: vec![Value::Int(v)] });
                    Value::Int(i64::MAX)
                }
            },
            Value::Float(v) => Value::Float(-v),
        },
        ExprKind::Cast(_, a) => match eval_expr(program, state, a, errors) {
            Value::Int(v) if e.ty == crate::frontend::ScalarType::Float => Value::Float(v as f64),
            Value::Float(v) if e.ty == crate::frontend::ScalarType::Int => {
                let (r, f) = concrete_float_to_int(v);
                if f.overflow {
                    errors.push(ErrorRecord { kind: ErrorKind::Overflow, loc: e.loc, values: vec![Value::Float(v)] });
                }
                Value::Int(r)
            }
            v => v,
        },
        ExprKind::Binary(BinOp::And, a, b) => {
            let x = eval_expr(program, state, a, errors).is_true();
            Value::Int((x && eval_expr(program, state, b, errors).is_true()) as i64)
        }
        ExprKind::Binary(BinOp::Or, a, b) => {
            let x = eval_expr(program, state, a, errors).is_true();
            Value::Int((x || eval_expr(program, state, b, errors).is_true()) as i64)
        }
        ExprKind::Binary(op, a, b) => {
            let x = eval_expr(program, state, a, errors);
            let y = eval_expr(program, state, b, errors);
            binary(*op, x, y, e, errors)
        }
    }
}

fn binary(op: BinOp, x: Value, y: Value, e: &Expr, errors: &mut Vec<ErrorRecord>) -> Value {
    let mut report = |kind, values: Vec<Value>| errors.push(ErrorRecord { kind, loc: e.loc, values });
    match (x, y) {
        (Value::Int(a), Value::Int(b)) => {
            let wide = |r: i128, report: &mut dyn FnMut(ErrorKind, Vec<Value>)| {
                if r > i64::MAX as i128 {
                    report(ErrorKind::Overflow, vec![x, y]);
                    i64::MAX
                } else if r < i64::MIN as i128 {
                    report(ErrorKind::Overflow, vec![x, y]);
                    i64::MIN
                } else {
                    r as i64
                }
            };
            let v = match op {
                BinOp::Add => wide(a as i128 + b as i128, &mut report),
                BinOp::Sub => wide(a as i128 - b as i128, &mut report),
                BinOp::Mul => wide(a as i128 * b as i128, &mut report),
                BinOp::Div | BinOp::Rem => {
                    let (r, f) = if op == BinOp::Div { concrete_int_div(a, b) } else { concrete_int_rem(a, b) };
                    if f.div_by_zero {
                        report(ErrorKind::DivByZero, vec![y]);
                    }
                    if f.overflow {
                        report(ErrorKind::Overflow, vec![x, y]);
                    }
                    r
                }
                BinOp::Lt => (a < b) as i64,
                BinOp::Le => (a <= b) as i64,
                BinOp::Gt => (a > b) as i64,
                BinOp::Ge => (a >= b) as i64,
                BinOp::Eq => (a == b) as i64,
                BinOp::Ne => (a != b) as i64,
                BinOp::And | BinOp::Or => unreachable!("handled by the caller"),
            };
            Value::Int(v)
        }
        (Value::Float(a), Value::Float(b)) => {
            let arith = |r: f64, report: &mut dyn FnMut(ErrorKind, Vec<Value>)| {
                let (v, f) = concrete_float_clamp(r);
                if f.overflow {
                    report(ErrorKind::Overflow, vec![x, y]);
                }
                Value::Float(v)
            };
            match op {
                BinOp::Add => arith(a + b, &mut report),
                BinOp::Sub => arith(a - b, &mut report),
                BinOp::Mul => arith(a * b, &mut report),
                BinOp::Div => {
                    if b == 0.0 {
                        report(ErrorKind::DivByZero, vec![y]);
                        Value::Float(0.0)
                    } else {
                        arith(a / b, &mut report)
                    }
                }
                BinOp::Lt => Value::Int((a < b) as i64),
                BinOp::Le => Value::Int((a <= b) as i64),
                BinOp::Gt => Value::Int((a > b) as i64),
                BinOp::Ge => Value::Int((a >= b) as i64),
                BinOp::Eq => Value::Int((a == b) as i64),
                BinOp::Ne => Value::Int((a != b) as i64),
                _ => unreachable!("ill-typed float operation"),
            }
        }
        _ => unreachable!("ill-typed operands"),
    }
}

/// Index into an array of length `len`; out-of-range indices are reported
/// and clamped to the nearest element.
pub fn index(program: &Program, state: &State, var: usize, idx: &Expr, errors: &mut Vec<ErrorRecord>) -> usize {
    let i = eval_expr(program, state, idx, errors).as_int();
    let len = program.var(var).array_len.unwrap_or(1) as i64;
    if i < 0 || i >= len {
        errors.push(ErrorRecord { kind: ErrorKind::ArrayOutOfBounds, loc: idx.loc, values: vec![Value::Int(i)] });
    }
    i.clamp(0, len - 1) as usize
}

pub fn read(program: &Program, state: &State, l: &LValue, errors: &mut Vec<ErrorRecord>) -> Value {
    let cell = &program.var(l.var()).cell;
    match l {
        LValue::Var(_) => state.scalar(cell).unwrap_or_else(|| panic!("unbound variable {cell}")),
        LValue::Index(v, idx) => {
            let i = index(program, state, *v, idx, errors);
            match state.cells.get(cell) {
                Some(Slot::Array(xs)) => xs[i],
                _ => panic!("unbound array {cell}"),
            }
        }
    }
}

/// Store `value` at `l`, evaluating the index (and reporting its errors).
pub fn write(program: &Program, state: &mut State, l: &LValue, value: Value, errors: &mut Vec<ErrorRecord>) {
    let cell = program.var(l.var()).cell.clone();
    match l {
        LValue::Var(_) => {
            state.cells.insert(cell, Slot::Scalar(value));
        }
        LValue::Index(v, idx) => {
            let i = index(program, state, *v, idx, errors);
            match state.cells.get_mut(&cell) {
                Some(Slot::Array(xs)) => xs[i] = value,
                _ => panic!("unbound array {cell}"),
            }
        }
    }
}

/// `l = e`: the right-hand side is evaluated before the index.
pub fn assign(program: &Program, state: &mut State, l: &LValue, e: &Expr, errors: &mut Vec<ErrorRecord>) {
    let v = eval_expr(program, state, e, errors);
    write(program, state, l, v, errors);
}
