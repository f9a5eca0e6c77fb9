//! Natural-number arithmetic with explicit partiality.
//!
//! Contracts use the `_opt` functions: a `None` result is a failed call.
//! `sub_trunc` and `mod_total` mirror the total operations of the CameLIGO
//! prelude (truncated subtraction, zero-defaulting remainder) and exist for
//! differential tests only.

use num_bigint::Sign;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::primitives::{Int, Nat, Tez};

pub fn sub_opt(n: &Nat, m: &Nat) -> Option<Nat> {
    if n < m {
        None
    } else {
        Some(n - m)
    }
}

pub fn div_opt(n: &Nat, m: &Nat) -> Option<Nat> {
    if m.is_zero() {
        None
    } else {
        Some(n / m)
    }
}

/// Ceiling division, `None` on a zero divisor.
pub fn ceildiv_opt(n: &Nat, m: &Nat) -> Option<Nat> {
    if m.is_zero() {
        return None;
    }
    let (q, r) = n.div_rem(m);
    Some(if r.is_zero() { q } else { q + Nat::one() })
}

pub fn sub_trunc(n: &Nat, m: &Nat) -> Nat {
    sub_opt(n, m).unwrap_or_else(Nat::zero)
}

pub fn mod_opt(n: &Nat, m: &Nat) -> Option<Nat> {
    if m.is_zero() {
        None
    } else {
        Some(n % m)
    }
}

/// The prelude's `moduloN`: remainder, or 0 for a zero divisor.
pub fn mod_total(n: &Nat, m: &Nat) -> Nat {
    mod_opt(n, m).unwrap_or_else(Nat::zero)
}

/// `n + q` when the result is non-negative.
pub fn int_add_nat(n: &Nat, q: &Int) -> Option<Nat> {
    let sum = Int::from(n.clone()) + q;
    match sum.sign() {
        Sign::Minus => None,
        _ => Some(sum.magnitude().clone()),
    }
}

pub fn amount_to_nat(a: &Tez) -> Nat {
    a.0.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(v: u64) -> Nat {
        Nat::from(v)
    }

    #[test]
    fn sub_opt_examples() {
        assert_eq!(sub_opt(&n(5), &n(3)), Some(n(2)));
        assert_eq!(sub_opt(&n(3), &n(5)), None);
        assert_eq!(sub_opt(&n(0), &n(0)), Some(n(0)));
    }

    #[test]
    fn div_opt_examples() {
        assert_eq!(div_opt(&n(7), &n(2)), Some(n(3)));
        assert_eq!(div_opt(&n(10), &n(0)), None);
        assert_eq!(div_opt(&n(0), &n(5)), Some(n(0)));
    }

    #[test]
    fn ceildiv_examples() {
        assert_eq!(ceildiv_opt(&n(100), &n(10)), Some(n(10)));
        assert_eq!(ceildiv_opt(&n(101), &n(10)), Some(n(11)));
        assert_eq!(ceildiv_opt(&n(0), &n(3)), Some(n(0)));
        assert_eq!(ceildiv_opt(&n(1), &n(0)), None);
    }

    #[test]
    fn truncated_and_modulo_examples() {
        assert_eq!(sub_trunc(&n(3), &n(5)), n(0));
        assert_eq!(sub_trunc(&n(5), &n(3)), n(2));
        assert_eq!(mod_opt(&n(7), &n(2)), Some(n(1)));
        assert_eq!(mod_opt(&n(1), &n(0)), None);
        assert_eq!(mod_total(&n(1), &n(0)), n(0));
    }

    #[test]
    fn int_add_nat_examples() {
        assert_eq!(int_add_nat(&n(50), &Int::from(-30)), Some(n(20)));
        assert_eq!(int_add_nat(&n(50), &Int::from(-60)), None);
        assert_eq!(int_add_nat(&n(0), &Int::from(5)), Some(n(5)));
        assert_eq!(int_add_nat(&n(50), &Int::from(-50)), Some(n(0)));
    }

    #[test]
    fn amount_embedding() {
        assert_eq!(amount_to_nat(&Tez::from(0)), n(0));
        assert_eq!(amount_to_nat(&Tez::from(100)), n(100));
    }

    proptest! {
        #[test]
        fn euclidean_identity(a in any::<u128>(), b in 1u128..) {
            let (a, b) = (Nat::from(a), Nat::from(b));
            let q = div_opt(&a, &b).unwrap();
            let r = mod_opt(&a, &b).unwrap();
            prop_assert!(r < b);
            prop_assert_eq!(&b * q + r, a);
        }

        #[test]
        fn sub_defined_iff_ge(a in any::<u64>(), b in any::<u64>()) {
            let res = sub_opt(&n(a), &n(b));
            prop_assert_eq!(res.is_some(), a >= b);
            if let Some(d) = res {
                prop_assert_eq!(d + n(b), n(a));
                prop_assert_eq!(sub_trunc(&n(a), &n(b)), n(a - b));
            } else {
                prop_assert_eq!(sub_trunc(&n(a), &n(b)), n(0));
            }
        }

        #[test]
        fn ceildiv_matches_floor_identity(x in any::<u64>(), y in 1u64..) {
            // ceil(x/y) = floor((x + y - 1) / y)
            let expected = div_opt(&(n(x) + n(y) - n(1)), &n(y)).unwrap();
            prop_assert_eq!(ceildiv_opt(&n(x), &n(y)).unwrap(), expected);
        }

        #[test]
        fn ceildiv_equals_floor_iff_divisible(x in any::<u64>(), y in 1u64..) {
            let exact = x % y == 0;
            prop_assert_eq!(ceildiv_opt(&n(x), &n(y)) == div_opt(&n(x), &n(y)), exact);
        }

        #[test]
        fn int_add_nat_agrees_with_i128(a in any::<u64>(), q in any::<i64>()) {
            let expected = a as i128 + q as i128;
            let got = int_add_nat(&n(a), &Int::from(q));
            if expected < 0 {
                prop_assert!(got.is_none());
            } else {
                prop_assert_eq!(got, Some(Nat::from(expected as u128)));
            }
        }
    }
}
