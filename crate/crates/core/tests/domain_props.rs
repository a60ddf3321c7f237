use std::sync::Arc;

use astral::absdomain::interval::{float_add, float_div, float_mul, int_add, int_div, int_mul, int_rem, int_sub};
use astral::absdomain::{rounding, AbstractEnv, Flags, Interval, Ladder};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = Interval> {
    (-1000i64..1000, 0i64..500).prop_map(|(lo, w)| Interval::int(lo, lo + w))
}

fn env_pair() -> impl Strategy<Value = (AbstractEnv, AbstractEnv)> {
    (2usize..200).prop_flat_map(|n| {
        (
            proptest::collection::vec(interval(), n),
            proptest::collection::vec((0..n, interval()), 0..20),
        )
            .prop_map(|(vals, edits)| {
                let base = AbstractEnv::from_cells(vals.iter().enumerate().map(|(k, v)| (format!("c{k:03}"), *v)));
                let mut derived = base.clone();
                for (k, v) in edits {
                    derived = derived.set(&Arc::from(format!("c{k:03}")), v);
                }
                (base, derived)
            })
    })
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

proptest! {
    #[test]
    fn interval_join_is_least_upper_bound(a in interval(), b in interval(), c in interval()) {
        let j = a.join(&b);
        prop_assert!(a.leq(&j) && b.leq(&j));
        prop_assert_eq!(j, b.join(&a));
        prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
        if a.leq(&c) && b.leq(&c) {
            prop_assert!(j.leq(&c));
        }
    }

    #[test]
    fn widening_over_approximates(a in interval(), b in interval()) {
        let w = a.widen(&b, &Ladder::default());
        prop_assert!(a.leq(&w) && b.leq(&w));
    }

    #[test]
    fn int_ops_contain_concrete_results(x in interval(), y in interval(), i in 0usize..100, j in 0usize..100) {
        let (xr, yr) = (x.int_range().unwrap(), y.int_range().unwrap());
        let a = xr.0 + (i as i64 * (xr.1 - xr.0)) / 99;
        let b = yr.0 + (j as i64 * (yr.1 - yr.0)) / 99;
        let mut f = Flags::default();
        prop_assert!(int_add(xr, yr, &mut f).contains_int(a + b));
        prop_assert!(int_sub(xr, yr, &mut f).contains_int(a - b));
        prop_assert!(int_mul(xr, yr, &mut f).contains_int(a * b));
        if b != 0 {
            prop_assert!(int_div(xr, yr, &mut f).contains_int(a / b));
            prop_assert!(int_rem(xr, yr, &mut f).contains_int(a % b));
        }
    }

    #[test]
    fn rounding_encloses_exact_result(a in -1e300f64..1e300, b in -1e300f64..1e300) {
        let (ea, eb) = (rat(a), rat(b));
        let check = |r: rounding::Rounded, exact: BigRational| {
            let lo_ok = !r.down.is_finite() || rat(r.down) <= exact;
            let hi_ok = !r.up.is_finite() || rat(r.up) >= exact;
            lo_ok && hi_ok && r.down <= r.up
        };
        prop_assert!(check(rounding::add(a, b), &ea + &eb));
        prop_assert!(check(rounding::mul(a, b), &ea * &eb));
        if b != 0.0 {
            prop_assert!(check(rounding::div(a, b), &ea / &eb));
        }
    }

    #[test]
    fn float_intervals_contain_samples(lo in -1e6f64..1e6, w in 0f64..1e3, lo2 in 0.5f64..1e3, t in 0f64..1.0) {
        let x = (lo, lo + w);
        let y = (lo2, lo2 * 2.0);
        let a = x.0 + t * w;
        let b = y.0 + t * lo2;
        let mut f = Flags::default();
        prop_assert!(float_add(x, y, &mut f).contains_float(a + b));
        prop_assert!(float_mul(x, y, &mut f).contains_float(a * b));
        prop_assert!(float_div(x, y, &mut f).contains_float(a / b));
    }

    #[test]
    fn env_join_is_commutative_and_associative((a, b) in env_pair(), k in 0usize..200) {
        let c = a.set(&Arc::from(format!("c{:03}", k % a.len())), Interval::int(-5, 5));
        prop_assert_eq!(a.join(&b).unwrap().canonical_bytes(), b.join(&a).unwrap().canonical_bytes());
        let l = a.join(&b).unwrap().join(&c).unwrap();
        let r = a.join(&b.join(&c).unwrap()).unwrap();
        prop_assert_eq!(l.canonical_bytes(), r.canonical_bytes());
        prop_assert!(a.leq(&l).unwrap() && b.leq(&l).unwrap() && c.leq(&l).unwrap());
    }

    #[test]
    fn patch_reproduces_derived((base, derived) in env_pair()) {
        let patch = base.diff(&derived);
        let bytes = patch.to_bytes();
        let back = astral::absdomain::DeltaPatch::from_bytes(&bytes).unwrap();
        let rebuilt = base.apply_patch(&back).unwrap();
        prop_assert_eq!(rebuilt.canonical_bytes(), derived.canonical_bytes());
        prop_assert!(rebuilt.check_invariants());
    }

    #[test]
    fn serialization_round_trips((base, derived) in env_pair()) {
        for e in [base, derived] {
            let back = AbstractEnv::from_canonical(&e.canonical_bytes()).unwrap();
            prop_assert_eq!(back.canonical_bytes(), e.canonical_bytes());
            prop_assert_eq!(back.digest(), e.digest());
        }
    }

    #[test]
    fn join_visits_track_changes((base, derived) in env_pair()) {
        let changed = base.diff(&derived).entries.len();
        let (_, visits) = base.join_counted(&derived).unwrap();
        let n = base.len() as f64;
        prop_assert!(visits as f64 <= 64.0 * (changed as f64 + 1.0) * (1.0 + n.log2()));
        if changed == 0 {
            prop_assert_eq!(visits, 0);
        }
    }
}

#[test]
fn patching_keeps_untouched_subtrees_shared() {
    let base = AbstractEnv::from_cells((0..5000).map(|k| (format!("v{k:05}"), Interval::int(0, k))));
    let derived = base.set(&Arc::from("v01234"), Interval::int(-1, -1));
    let rebuilt = base.apply_patch(&base.diff(&derived)).unwrap();
    let shared_direct = derived.shared_nodes(&base);
    assert_eq!(rebuilt.shared_nodes(&base), shared_direct);
    assert!(shared_direct + 64 >= base.len());
    assert!(rebuilt.height() <= 4 * (1 + (5000f64).log2() as usize));
}

#[test]
fn bigint_oracle_sanity() {
    assert_eq!(rat(0.5) * BigRational::from_integer(BigInt::from(4)), BigRational::from_integer(BigInt::from(2)));
}
