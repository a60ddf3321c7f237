use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;

use crate::absdomain::{AbstractEnv, Interval};
use crate::frontend::{Location, Program, ScalarType, VarId};

/// A concrete scalar. Floats compare and hash by bit pattern, so states
/// are usable as set members.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, h: &mut H) {
        match self {
            Value::Int(v) => (0u8, *v).hash(h),
            Value::Float(v) => (1u8, v.to_bits()).hash(h),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Int(_), Value::Float(_)) => std::cmp::Ordering::Less,
            (Value::Float(_), Value::Int(_)) => std::cmp::Ordering::Greater,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
        }
    }
}

impl Value {
    pub fn zero(ty: ScalarType) -> Value {
        match ty {
            ScalarType::Int => Value::Int(0),
            ScalarType::Float => Value::Float(0.0),
        }
    }

    pub fn is_true(self) -> bool {
        match self {
            Value::Int(v) => v != 0,
            Value::Float(v) => v != 0.0,
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Float(_) => panic!("float used as int"),
        }
    }

    /// Membership in an abstract interval.
    pub fn within(self, i: &Interval) -> bool {
        match self {
            Value::Int(v) => i.contains_int(v),
            Value::Float(v) => i.contains_float(v),
        }
    }
}

/// Contents of one variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Scalar(Value),
    Array(Vec<Value>),
}

/// A concrete memory state: one slot per variable in scope, keyed by cell name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub cells: BTreeMap<Arc<str>, Slot>,
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match v {
                Slot::Scalar(x) => write!(f, "{k}: {x}")?,
                Slot::Array(xs) => {
                    write!(f, "{k}: [")?;
                    for (j, x) in xs.iter().enumerate() {
                        write!(f, "{}{x}", if j > 0 { ", " } else { "" })?;
                    }
                    f.write_str("]")?;
                }
            }
        }
        f.write_str("}")
    }
}

impl State {
    /// Bind a variable to the zero of its type (arrays element-wise).
    pub fn declare(&mut self, program: &Program, var: VarId) {
        let v = program.var(var);
        let zero = Value::zero(v.ty);
        let slot = match v.array_len {
            Some(n) => Slot::Array(vec![zero; n as usize]),
            None => Slot::Scalar(zero),
        };
        self.cells.insert(v.cell.clone(), slot);
    }

    pub fn undeclare(&mut self, program: &Program, var: VarId) {
        self.cells.remove(&program.var(var).cell);
    }

    pub fn scalar(&self, cell: &str) -> Option<Value> {
        match self.cells.get(cell)? {
            Slot::Scalar(v) => Some(*v),
            Slot::Array(_) => None,
        }
    }

    /// Whether every slot lies in the abstract environment (arrays through
    /// their smashed cell). Cells missing from `env` fail the test.
    pub fn within(&self, env: &AbstractEnv) -> bool {
        if env.is_bottom() {
            return false;
        }
        self.cells.iter().all(|(k, slot)| match env.get(k) {
            None => false,
            Some(i) => match slot {
                Slot::Scalar(v) => v.within(&i),
                Slot::Array(vs) => vs.iter().all(|v| v.within(&i)),
            },
        })
    }

    /// The first cell that falls outside `env`, for diagnostics.
    pub fn first_escape(&self, env: &AbstractEnv) -> Option<String> {
        for (k, slot) in &self.cells {
            let ok = match (env.get(k), slot) {
                (None, _) => false,
                (Some(i), Slot::Scalar(v)) => v.within(&i),
                (Some(i), Slot::Array(vs)) => vs.iter().all(|v| v.within(&i)),
            };
            if !ok {
                return Some(format!("{k} = {slot:?} not in {:?}", env.get(k)));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Overflow,
    DivByZero,
    ArrayOutOfBounds,
    AssertFailure,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Overflow => "overflow",
            ErrorKind::DivByZero => "div-by-zero",
            ErrorKind::ArrayOutOfBounds => "array-out-of-bounds",
            ErrorKind::AssertFailure => "assert-failure",
        })
    }
}

/// A runtime error observed during concrete execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErrorRecord {
    pub kind: ErrorKind,
    pub loc: Location,
    pub values: Vec<Value>,
}

impl fmt::Display for ErrorRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.kind)?;
        for (i, v) in self.values.iter().enumerate() {
            write!(f, "{}{v}", if i == 0 { " " } else { ", " })?;
        }
        Ok(())
    }
}
