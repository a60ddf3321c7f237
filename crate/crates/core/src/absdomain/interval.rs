use std::cmp::{max, min};
use std::fmt;

use crate::frontend::ScalarType;

use super::rounding;

/// A bound of an integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntBound {
    NegInf,
    Finite(i64),
    PosInf,
}

impl IntBound {
    /// The bound saturated into the 64-bit range; concrete values never lie
    /// outside it, so this does not change the concretization.
    pub fn saturate(self) -> i64 {
        match self {
            IntBound::NegInf => i64::MIN,
            IntBound::Finite(v) => v,
            IntBound::PosInf => i64::MAX,
        }
    }
}

impl fmt::Display for IntBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntBound::NegInf => f.write_str("-inf"),
            IntBound::Finite(v) => write!(f, "{v}"),
            IntBound::PosInf => f.write_str("+inf"),
        }
    }
}

/// Value of an abstract cell: a possibly empty interval of 64-bit integers
/// or of finite doubles. Float bounds are never NaN and `-0.0` is stored as
/// `0.0`; infinite bounds appear only through widening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interval {
    Empty(ScalarType),
    Int(IntBound, IntBound),
    Float(f64, f64),
}

/// Runtime-error possibilities raised by an interval operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub overflow: bool,
    pub div_by_zero: bool,
}

impl Flags {
    pub fn merge(&mut self, other: Flags) {
        self.overflow |= other.overflow;
        self.div_by_zero |= other.div_by_zero;
    }
}

fn norm(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

impl Interval {
    pub fn int(lo: i64, hi: i64) -> Interval {
        Interval::int_bounds(IntBound::Finite(lo), IntBound::Finite(hi))
    }

    pub fn int_bounds(lo: IntBound, hi: IntBound) -> Interval {
        if lo > hi || lo == IntBound::PosInf || hi == IntBound::NegInf {
            Interval::Empty(ScalarType::Int)
        } else {
            Interval::Int(lo, hi)
        }
    }

    pub fn float(lo: f64, hi: f64) -> Interval {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN interval bound");
        if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            Interval::Empty(ScalarType::Float)
        } else {
            Interval::Float(norm(lo), norm(hi))
        }
    }

    pub fn int_const(v: i64) -> Interval {
        Interval::int(v, v)
    }

    pub fn float_const(v: f64) -> Interval {
        Interval::float(v, v)
    }

    /// Every value of the type.
    pub fn top(kind: ScalarType) -> Interval {
        match kind {
            ScalarType::Int => Interval::int(i64::MIN, i64::MAX),
            ScalarType::Float => Interval::float(-f64::MAX, f64::MAX),
        }
    }

    pub fn bottom(kind: ScalarType) -> Interval {
        Interval::Empty(kind)
    }

    /// The interval {0, 1} of boolean results.
    pub fn boolean() -> Interval {
        Interval::int(0, 1)
    }

    pub fn kind(&self) -> ScalarType {
        match self {
            Interval::Empty(k) => *k,
            Interval::Int(..) => ScalarType::Int,
            Interval::Float(..) => ScalarType::Float,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Interval::Empty(_))
    }

    /// Integer bounds saturated into the 64-bit range.
    pub fn int_range(&self) -> Option<(i64, i64)> {
        match self {
            Interval::Int(lo, hi) => Some((lo.saturate(), hi.saturate())),
            _ => None,
        }
    }

    /// Float bounds clamped to the finite range.
    pub fn float_range(&self) -> Option<(f64, f64)> {
        match self {
            Interval::Float(lo, hi) => Some((lo.max(-f64::MAX), hi.min(f64::MAX))),
            _ => None,
        }
    }

    pub fn contains_int(&self, v: i64) -> bool {
        match self {
            Interval::Int(lo, hi) => *lo <= IntBound::Finite(v) && IntBound::Finite(v) <= *hi,
            _ => false,
        }
    }

    pub fn contains_float(&self, v: f64) -> bool {
        match self {
            Interval::Float(lo, hi) => *lo <= v && v <= *hi,
            _ => false,
        }
    }

    /// Whether the interval contains the value zero of its type.
    pub fn contains_zero(&self) -> bool {
        match self {
            Interval::Int(..) => self.contains_int(0),
            Interval::Float(..) => self.contains_float(0.0),
            Interval::Empty(_) => false,
        }
    }

    /// Whether every value of the interval is zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Interval::Int(lo, hi) => *lo == IntBound::Finite(0) && *hi == IntBound::Finite(0),
            Interval::Float(lo, hi) => *lo == 0.0 && *hi == 0.0,
            Interval::Empty(_) => false,
        }
    }

    pub fn join(&self, other: &Interval) -> Interval {
        match (*self, *other) {
            (Interval::Empty(_), x) | (x, Interval::Empty(_)) => x,
            (Interval::Int(a, b), Interval::Int(c, d)) => Interval::Int(min(a, c), max(b, d)),
            (Interval::Float(a, b), Interval::Float(c, d)) => Interval::Float(a.min(c), b.max(d)),
            _ => panic!("join of intervals of different kinds"),
        }
    }

    pub fn meet(&self, other: &Interval) -> Interval {
        match (*self, *other) {
            (Interval::Empty(k), _) | (_, Interval::Empty(k)) => Interval::Empty(k),
            (Interval::Int(a, b), Interval::Int(c, d)) => Interval::int_bounds(max(a, c), min(b, d)),
            (Interval::Float(a, b), Interval::Float(c, d)) => Interval::float(a.max(c), b.min(d)),
            _ => panic!("meet of intervals of different kinds"),
        }
    }

    pub fn leq(&self, other: &Interval) -> bool {
        match (*self, *other) {
            (Interval::Empty(_), _) => true,
            (_, Interval::Empty(_)) => false,
            (Interval::Int(a, b), Interval::Int(c, d)) => c <= a && b <= d,
            (Interval::Float(a, b), Interval::Float(c, d)) => c <= a && b <= d,
            _ => false,
        }
    }

    /// Threshold widening: a bound that grows jumps to the next rung of the
    /// ladder, or to infinity past the last rung.
    pub fn widen(&self, next: &Interval, ladder: &Ladder) -> Interval {
        match (*self, *next) {
            (Interval::Empty(_), x) => x,
            (x, Interval::Empty(_)) => x,
            (Interval::Int(a, b), Interval::Int(c, d)) => {
                let lo = if c < a { ladder.int_below(c) } else { a };
                let hi = if d > b { ladder.int_above(d) } else { b };
                Interval::Int(lo, hi)
            }
            (Interval::Float(a, b), Interval::Float(c, d)) => {
                let lo = if c < a { ladder.float_below(c) } else { a };
                let hi = if d > b { ladder.float_above(d) } else { b };
                Interval::Float(lo, hi)
            }
            _ => panic!("widening of intervals of different kinds"),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Empty(_) => f.write_str("empty"),
            Interval::Int(lo, hi) => write!(f, "[{lo}, {hi}]"),
            Interval::Float(lo, hi) => write!(f, "[{}, {}]", fmt_float(*lo), fmt_float(*hi)),
        }
    }
}

fn fmt_float(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

/// Widening thresholds, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    ints: Vec<i64>,
    floats: Vec<f64>,
}

impl Default for Ladder {
    fn default() -> Self {
        let pos = [1.0, 10.0, 100.0, 1e3, 1e6, 1e9];
        Ladder::new(pos.iter().flat_map(|v| [*v, -*v]))
    }
}

impl Ladder {
    /// Build a ladder from arbitrary finite values; order and duplicates do
    /// not matter.
    pub fn new(values: impl IntoIterator<Item = f64>) -> Ladder {
        let mut floats: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).map(norm).collect();
        floats.sort_by(f64::total_cmp);
        floats.dedup();
        // integer rungs: round toward the side that keeps them sound as bounds
        let mut ints: Vec<i64> = floats
            .iter()
            .filter(|v| v.abs() < 9.2e18)
            .map(|v| v.round() as i64)
            .collect();
        ints.dedup();
        Ladder { ints, floats }
    }

    pub fn values(&self) -> &[f64] {
        &self.floats
    }

    /// Number of finite rungs.
    pub fn len(&self) -> usize {
        self.floats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.floats.is_empty()
    }

    fn int_above(&self, v: IntBound) -> IntBound {
        match self.ints.iter().find(|t| IntBound::Finite(**t) >= v) {
            Some(t) => IntBound::Finite(*t),
            None => IntBound::PosInf,
        }
    }

    fn int_below(&self, v: IntBound) -> IntBound {
        match self.ints.iter().rev().find(|t| IntBound::Finite(**t) <= v) {
            Some(t) => IntBound::Finite(*t),
            None => IntBound::NegInf,
        }
    }

    fn float_above(&self, v: f64) -> f64 {
        self.floats.iter().copied().find(|t| *t >= v).unwrap_or(f64::INFINITY)
    }

    fn float_below(&self, v: f64) -> f64 {
        self.floats.iter().rev().copied().find(|t| *t <= v).unwrap_or(f64::NEG_INFINITY)
    }
}

// ---- integer arithmetic ----
//
// Concrete semantics: results outside the 64-bit range are clamped to it and
// raise an overflow; division or remainder by zero yields 0 and raises a
// division error. Bounds are saturated first, which leaves the
// concretization unchanged.

fn clamp_i128(v: i128, flags: &mut Flags) -> i64 {
    if v > i64::MAX as i128 {
        flags.overflow = true;
        i64::MAX
    } else if v < i64::MIN as i128 {
        flags.overflow = true;
        i64::MIN
    } else {
        v as i64
    }
}

fn int_from_corners(corners: [i128; 4], flags: &mut Flags) -> Interval {
    let lo = *corners.iter().min().unwrap();
    let hi = *corners.iter().max().unwrap();
    Interval::int(clamp_i128(lo, flags), clamp_i128(hi, flags))
}

/// The concrete integer division (truncating, clamped, 0 on zero divisor).
pub fn concrete_int_div(a: i64, b: i64) -> (i64, Flags) {
    let mut flags = Flags::default();
    if b == 0 {
        flags.div_by_zero = true;
        return (0, flags);
    }
    let v = clamp_i128(a as i128 / b as i128, &mut flags);
    (v, flags)
}

/// The concrete integer remainder (sign of the dividend, 0 on zero divisor).
pub fn concrete_int_rem(a: i64, b: i64) -> (i64, Flags) {
    let mut flags = Flags::default();
    if b == 0 {
        flags.div_by_zero = true;
        return (0, flags);
    }
    ((a as i128 % b as i128) as i64, flags)
}

pub fn int_add(x: (i64, i64), y: (i64, i64), flags: &mut Flags) -> Interval {
    Interval::int(
        clamp_i128(x.0 as i128 + y.0 as i128, flags),
        clamp_i128(x.1 as i128 + y.1 as i128, flags),
    )
}

pub fn int_sub(x: (i64, i64), y: (i64, i64), flags: &mut Flags) -> Interval {
    Interval::int(
        clamp_i128(x.0 as i128 - y.1 as i128, flags),
        clamp_i128(x.1 as i128 - y.0 as i128, flags),
    )
}

pub fn int_mul(x: (i64, i64), y: (i64, i64), flags: &mut Flags) -> Interval {
    let (a, b, c, d) = (x.0 as i128, x.1 as i128, y.0 as i128, y.1 as i128);
    int_from_corners([a * c, a * d, b * c, b * d], flags)
}

pub fn int_div(x: (i64, i64), y: (i64, i64), flags: &mut Flags) -> Interval {
    let mut parts: Vec<(i64, i64)> = Vec::with_capacity(2);
    if y.0 <= 0 && 0 <= y.1 {
        flags.div_by_zero = true;
    }
    // split the divisor around zero; quotient is monotone on each sign part
    if y.0 < 0 {
        parts.push((y.0, min(y.1, -1)));
    }
    if y.1 > 0 {
        parts.push((max(y.0, 1), y.1));
    }
    let mut out = if y.0 <= 0 && 0 <= y.1 { Interval::int_const(0) } else { Interval::Empty(ScalarType::Int) };
    for (c, d) in parts {
        let (a, b, c, d) = (x.0 as i128, x.1 as i128, c as i128, d as i128);
        let r = int_from_corners([a / c, a / d, b / c, b / d], flags);
        out = out.join(&r);
    }
    out
}

pub fn int_rem(x: (i64, i64), y: (i64, i64), flags: &mut Flags) -> Interval {
    let zero_divisor = y.0 <= 0 && 0 <= y.1;
    if zero_divisor {
        flags.div_by_zero = true;
        if y == (0, 0) {
            return Interval::int_const(0);
        }
    }
    // |x % y| < |y| and the result has the sign of x
    let m = max((y.0 as i128).abs(), (y.1 as i128).abs()) - 1;
    let m = min(m, i64::MAX as i128) as i64;
    let lo = if x.0 < 0 { max(x.0, -m) } else { 0 };
    let hi = if x.1 > 0 { min(x.1, m) } else { 0 };
    // a dividend range inside (-|y|, |y|) with a single-signed x is unchanged
    let mut r = Interval::int(lo, hi);
    if zero_divisor {
        r = r.join(&Interval::int_const(0));
    }
    r
}

pub fn int_neg(x: (i64, i64), flags: &mut Flags) -> Interval {
    Interval::int(clamp_i128(-(x.1 as i128), flags), clamp_i128(-(x.0 as i128), flags))
}

// ---- float arithmetic ----
//
// Concrete semantics: round-to-nearest doubles; a result that rounds to an
// infinity is clamped to the largest finite double of that sign and raises
// an overflow; division by zero yields 0 and raises a division error.

fn clamp_float(lo: f64, hi: f64, flags: &mut Flags) -> Interval {
    if hi == f64::INFINITY || lo == f64::NEG_INFINITY {
        flags.overflow = true;
    }
    Interval::float(lo.clamp(-f64::MAX, f64::MAX), hi.clamp(-f64::MAX, f64::MAX))
}

/// The concrete double result of `a op b` after clamping.
pub fn concrete_float_clamp(v: f64) -> (f64, Flags) {
    let mut flags = Flags::default();
    if v.is_infinite() {
        flags.overflow = true;
        (v.clamp(-f64::MAX, f64::MAX), flags)
    } else {
        (norm(v), flags)
    }
}

pub fn float_add(x: (f64, f64), y: (f64, f64), flags: &mut Flags) -> Interval {
    clamp_float(rounding::add(x.0, y.0).down, rounding::add(x.1, y.1).up, flags)
}

pub fn float_sub(x: (f64, f64), y: (f64, f64), flags: &mut Flags) -> Interval {
    clamp_float(rounding::sub(x.0, y.1).down, rounding::sub(x.1, y.0).up, flags)
}

pub fn float_mul(x: (f64, f64), y: (f64, f64), flags: &mut Flags) -> Interval {
    let cs = [
        rounding::mul(x.0, y.0),
        rounding::mul(x.0, y.1),
        rounding::mul(x.1, y.0),
        rounding::mul(x.1, y.1),
    ];
    let lo = cs.iter().map(|r| r.down).fold(f64::INFINITY, f64::min);
    let hi = cs.iter().map(|r| r.up).fold(f64::NEG_INFINITY, f64::max);
    clamp_float(lo, hi, flags)
}

pub fn float_div(x: (f64, f64), y: (f64, f64), flags: &mut Flags) -> Interval {
    if y.0 <= 0.0 && 0.0 <= y.1 {
        flags.div_by_zero = true;
        if x == (0.0, 0.0) || y == (0.0, 0.0) {
            return Interval::float_const(0.0);
        }
        // divisors arbitrarily close to zero
        flags.overflow = true;
        return Interval::float(-f64::MAX, f64::MAX);
    }
    let cs = [
        rounding::div(x.0, y.0),
        rounding::div(x.0, y.1),
        rounding::div(x.1, y.0),
        rounding::div(x.1, y.1),
    ];
    let lo = cs.iter().map(|r| r.down).fold(f64::INFINITY, f64::min);
    let hi = cs.iter().map(|r| r.up).fold(f64::NEG_INFINITY, f64::max);
    clamp_float(lo, hi, flags)
}

pub fn float_neg(x: (f64, f64)) -> Interval {
    Interval::float(-x.1, -x.0)
}

/// Truncation of a double to an integer, clamped to the 64-bit range.
pub fn concrete_float_to_int(v: f64) -> (i64, Flags) {
    let mut flags = Flags::default();
    let t = v.trunc();
    // 2^63 is exactly representable; anything at or above it overflows
    if t >= 9_223_372_036_854_775_808.0 {
        flags.overflow = true;
        (i64::MAX, flags)
    } else if t < -9_223_372_036_854_775_808.0 {
        flags.overflow = true;
        (i64::MIN, flags)
    } else {
        (t as i64, flags)
    }
}

pub fn float_to_int(x: (f64, f64), flags: &mut Flags) -> Interval {
    let (lo, f1) = concrete_float_to_int(x.0);
    let (hi, f2) = concrete_float_to_int(x.1);
    flags.merge(f1);
    flags.merge(f2);
    Interval::int(lo, hi)
}

pub fn int_to_float(x: (i64, i64)) -> Interval {
    Interval::float(rounding::from_i64(x.0).down, rounding::from_i64(x.1).up)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_meet_leq() {
        let a = Interval::int(1, 3);
        let b = Interval::int(2, 5);
        assert_eq!(a.join(&b), Interval::int(1, 5));
        assert_eq!(a.meet(&b), Interval::int(2, 3));
        assert!(Interval::int(1, 2).leq(&Interval::int(0, 5)));
        assert!(!Interval::int(1, 2).leq(&Interval::int(2, 5)));
        assert!(Interval::int(4, 9).meet(&Interval::int(0, 3)).is_empty());
    }

    #[test]
    fn widening_ladder() {
        let ladder = Ladder::default();
        let w = Interval::int(0, 1).widen(&Interval::int(0, 2), &ladder);
        assert_eq!(w, Interval::int(0, 10));
        let positive = Ladder::new([1.0, 10.0, 100.0]);
        let w = Interval::int(0, 10).widen(&Interval::int(-1, 10), &positive);
        assert_eq!(w, Interval::Int(IntBound::NegInf, IntBound::Finite(10)));
        let w = Interval::int(0, 1e9 as i64).widen(&Interval::int(0, 1e9 as i64 + 1), &ladder);
        assert_eq!(w, Interval::Int(IntBound::Finite(0), IntBound::PosInf));
        assert_eq!(Interval::int(0, 5).widen(&Interval::int(0, 5), &ladder), Interval::int(0, 5));
    }

    #[test]
    fn int_overflow_clamps() {
        let mut f = Flags::default();
        let r = int_add((i64::MAX - 1, i64::MAX), (1, 1), &mut f);
        assert!(f.overflow);
        assert_eq!(r, Interval::int(i64::MAX, i64::MAX));
    }

    #[test]
    fn int_division_by_range_with_zero() {
        let mut f = Flags::default();
        let r = int_div((100, 100), (0, 10), &mut f);
        assert!(f.div_by_zero);
        assert_eq!(r, Interval::int(0, 100));
        let mut f = Flags::default();
        assert_eq!(int_div((100, 100), (1, 10), &mut f), Interval::int(10, 100));
        assert_eq!(f, Flags::default());
    }

    #[test]
    fn min_div_minus_one() {
        let mut f = Flags::default();
        assert_eq!(int_div((i64::MIN, i64::MIN), (-1, -1), &mut f), Interval::int_const(i64::MAX));
        assert!(f.overflow);
        let mut f = Flags::default();
        assert_eq!(int_rem((i64::MIN, i64::MIN), (-1, -1), &mut f), Interval::int_const(0));
        assert_eq!(f, Flags::default());
        assert_eq!(concrete_int_rem(i64::MIN, -1).0, 0);
    }

    #[test]
    fn remainder_bounds() {
        let mut f = Flags::default();
        assert_eq!(int_rem((0, 100), (8, 8), &mut f), Interval::int(0, 7));
        assert_eq!(int_rem((-5, 3), (4, 4), &mut f), Interval::int(-3, 3));
        assert_eq!(int_rem((2, 3), (8, 8), &mut f), Interval::int(0, 3));
    }

    #[test]
    fn float_division_by_zero_range() {
        let mut f = Flags::default();
        let r = float_div((1.0, 2.0), (-1.0, 1.0), &mut f);
        assert!(f.div_by_zero);
        assert_eq!(r, Interval::top(ScalarType::Float));
    }

    #[test]
    fn float_to_int_truncates() {
        let mut f = Flags::default();
        assert_eq!(float_to_int((-2.7, 3.9), &mut f), Interval::int(-2, 3));
        assert!(!f.overflow);
        float_to_int((0.0, 1e19), &mut f);
        assert!(f.overflow);
    }

    #[test]
    fn negative_zero_normalized() {
        assert_eq!(Interval::float(-0.0, -0.0), Interval::Float(0.0, 0.0));
        if let Interval::Float(lo, _) = Interval::float(-0.0, 1.0) {
            assert!(lo.is_sign_positive());
        }
    }
}
