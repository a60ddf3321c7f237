//! Directed rounding for `f64` without touching the FPU rounding mode.
//!
//! Each operation computes the round-to-nearest result and recovers the
//! sign of the rounding error with an error-free transformation (TwoSum for
//! addition, a fused multiply-add for products and quotients). The result is
//! then moved one ulp in the required direction only when it was inexact.
//! Near the underflow threshold the error terms are no longer exact, so the
//! result is widened by one ulp in both directions.

/// Below this magnitude the error-free transformations may lose bits.
const TINY: f64 = 1e-290;

/// A pair of bounds enclosing the exact real result of an operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rounded {
    pub down: f64,
    pub up: f64,
}

fn from_error(r: f64, err_sign: f64) -> Rounded {
    if err_sign > 0.0 {
        Rounded { down: r, up: r.next_up() }
    } else if err_sign < 0.0 {
        Rounded { down: r.next_down(), up: r }
    } else {
        Rounded { down: r, up: r }
    }
}

fn overflowed(r: f64) -> Rounded {
    // the exact result is beyond the finite range, on the side of r
    if r > 0.0 {
        Rounded { down: f64::MAX, up: f64::INFINITY }
    } else {
        Rounded { down: f64::NEG_INFINITY, up: -f64::MAX }
    }
}

fn nudge(r: f64) -> Rounded {
    Rounded { down: r.next_down(), up: r.next_up() }
}

/// Enclosure of `a + b` for finite operands.
pub fn add(a: f64, b: f64) -> Rounded {
    let r = a + b;
    if r.is_infinite() {
        return overflowed(r);
    }
    // TwoSum
    let bb = r - a;
    let err = (a - (r - bb)) + (b - bb);
    from_error(r, err)
}

/// Enclosure of `a - b` for finite operands.
pub fn sub(a: f64, b: f64) -> Rounded {
    add(a, -b)
}

/// Enclosure of `a * b` for finite operands.
pub fn mul(a: f64, b: f64) -> Rounded {
    if a == 0.0 || b == 0.0 {
        return Rounded { down: 0.0, up: 0.0 };
    }
    let r = a * b;
    if r.is_infinite() {
        return overflowed(r);
    }
    if r.abs() < TINY {
        return nudge(r);
    }
    let err = a.mul_add(b, -r);
    from_error(r, err)
}

/// Enclosure of `a / b` for finite operands and `b != 0`.
pub fn div(a: f64, b: f64) -> Rounded {
    debug_assert!(b != 0.0);
    if a == 0.0 {
        return Rounded { down: 0.0, up: 0.0 };
    }
    let r = a / b;
    if r.is_infinite() {
        return overflowed(r);
    }
    if r.abs() < TINY || a.abs() < TINY || b.abs() < TINY {
        return nudge(r);
    }
    // a - r*b, exact; the true quotient exceeds r iff rem/b > 0
    let rem = (-r).mul_add(b, a);
    from_error(r, rem * b.signum())
}

/// Enclosure of the integer `v` as a double.
pub fn from_i64(v: i64) -> Rounded {
    let f = v as f64;
    let back = f as i128;
    let v = v as i128;
    if back > v {
        Rounded { down: f.next_down(), up: f }
    } else if back < v {
        Rounded { down: f, up: f.next_up() }
    } else {
        Rounded { down: f, up: f }
    }
}

/// Reference battery evaluated at startup by distributed workers; every
/// participant must reproduce these bit patterns.
pub fn self_test_vector() -> [f64; 8] {
    [
        add(0.1, 0.2).down,
        add(0.1, 0.2).up,
        mul(1.0 / 3.0, 3.0).down,
        mul(1.0 / 3.0, 3.0).up,
        div(1.0, 3.0).down,
        div(2.0, 3.0).up,
        sub(1e16, 1.0).down,
        from_i64(i64::MAX).down,
    ]
}

/// Bit patterns of [`self_test_vector`] on a conforming IEEE-754 platform.
pub const SELF_TEST_REFERENCE: [u64; 8] = [
    0x3fd3333333333333,
    0x3fd3333333333334,
    0x3fefffffffffffff,
    0x3ff0000000000000,
    0x3fd5555555555555,
    0x3fe5555555555556,
    0x4341c37937e07fff,
    0x43dfffffffffffff,
];

/// Check [`self_test_vector`] against [`SELF_TEST_REFERENCE`].
pub fn self_test() -> bool {
    self_test_vector().iter().zip(SELF_TEST_REFERENCE).all(|(v, r)| v.to_bits() == r)
}
