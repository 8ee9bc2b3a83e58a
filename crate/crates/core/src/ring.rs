//! Coefficient rings used by cochains and matrix reduction.
//!
//! Two rings are supported: the integers, stored as `i64` until an operation
//! overflows and then promoted to an arbitrary-precision [`BigInt`], and the
//! two-element field.

use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{Signed, ToPrimitive, Zero};

/// Ring tag carried by cochains and reduction problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ring {
    Integers,
    Z2,
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Integers => f.write_str("Z"),
            Ring::Z2 => f.write_str("Z2"),
        }
    }
}

/// Coefficients of a commutative ring in which divisibility is decidable and
/// Bezout coefficients exist (a principal ideal domain).
pub trait Coefficient: Clone + PartialEq + Eq + Hash + fmt::Debug + Send + Sync + 'static {
    const RING: Ring;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Whether `self` divides `other`.
    fn divides(&self, other: &Self) -> bool;

    /// `other / self`, assuming `self` divides `other`.
    fn quotient_of(&self, other: &Self) -> Self;

    /// Unimodular `[a, b, c, d]` with `a*p + b*q = gcd(p, q)` and
    /// `c*p + d*q = 0`. When `p` divides `q` the result is
    /// `[1, 0, -q/p, 1]`, which leaves the first operand untouched.
    fn bezout(p: &Self, q: &Self) -> [Self; 4];

    fn to_i64(&self) -> Option<i64>;

    /// Image under the reduction `Z -> Z2` (identity on `Z2`).
    fn is_odd(&self) -> bool;
}

/// An integer that is stored inline while it fits in 64 bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Integer {
    Small(i64),
    Big(Box<BigInt>),
}

impl Integer {
    fn from_big(b: BigInt) -> Self {
        match b.to_i64() {
            Some(v) => Integer::Small(v),
            None => Integer::Big(Box::new(b)),
        }
    }

    pub fn to_bigint(&self) -> BigInt {
        match self {
            Integer::Small(v) => BigInt::from(*v),
            Integer::Big(b) => (**b).clone(),
        }
    }

    pub fn is_big(&self) -> bool {
        matches!(self, Integer::Big(_))
    }
}

impl fmt::Debug for Integer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integer::Small(v) => write!(f, "{v}"),
            Integer::Big(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Display for Integer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<i64> for Integer {
    fn from(v: i64) -> Self {
        Integer::Small(v)
    }
}

impl From<BigInt> for Integer {
    fn from(b: BigInt) -> Self {
        Integer::from_big(b)
    }
}

impl Coefficient for Integer {
    const RING: Ring = Ring::Integers;

    fn zero() -> Self {
        Integer::Small(0)
    }

    fn one() -> Self {
        Integer::Small(1)
    }

    fn from_i64(v: i64) -> Self {
        Integer::Small(v)
    }

    fn is_zero(&self) -> bool {
        match self {
            Integer::Small(v) => *v == 0,
            Integer::Big(b) => b.is_zero(),
        }
    }

    fn add(&self, other: &Self) -> Self {
        if let (Integer::Small(a), Integer::Small(b)) = (self, other) {
            if let Some(s) = a.checked_add(*b) {
                return Integer::Small(s);
            }
        }
        Integer::from_big(self.to_bigint() + other.to_bigint())
    }

    fn mul(&self, other: &Self) -> Self {
        if let (Integer::Small(a), Integer::Small(b)) = (self, other) {
            if let Some(s) = a.checked_mul(*b) {
                return Integer::Small(s);
            }
        }
        Integer::from_big(self.to_bigint() * other.to_bigint())
    }

    fn neg(&self) -> Self {
        match self {
            Integer::Small(v) => match v.checked_neg() {
                Some(n) => Integer::Small(n),
                None => Integer::from_big(-BigInt::from(*v)),
            },
            Integer::Big(b) => Integer::from_big(-(**b).clone()),
        }
    }

    fn divides(&self, other: &Self) -> bool {
        match (self, other) {
            (_, o) if o.is_zero() => true,
            (s, _) if s.is_zero() => false,
            (Integer::Small(a), Integer::Small(b)) => {
                // i64::MIN % -1 overflows; treat the unit case first
                *a == 1 || *a == -1 || b % a == 0
            }
            _ => other.to_bigint().is_multiple_of(&self.to_bigint()),
        }
    }

    fn quotient_of(&self, other: &Self) -> Self {
        match (self, other) {
            (Integer::Small(a), Integer::Small(b)) => match b.checked_div(*a) {
                Some(q) => Integer::Small(q),
                None => Integer::from_big(BigInt::from(*b) / BigInt::from(*a)),
            },
            _ => Integer::from_big(other.to_bigint() / self.to_bigint()),
        }
    }

    fn bezout(p: &Self, q: &Self) -> [Self; 4] {
        if p.divides(q) {
            return [
                Self::one(),
                Self::zero(),
                p.quotient_of(q).neg(),
                Self::one(),
            ];
        }
        if let (Integer::Small(a), Integer::Small(b)) = (p, q) {
            let (g, x, y) = ext_gcd_i128(*a as i128, *b as i128);
            let c = -(*b as i128) / g;
            let d = (*a as i128) / g;
            let fit = |v: i128| i64::try_from(v).ok();
            if let (Some(x), Some(y), Some(c), Some(d)) = (fit(x), fit(y), fit(c), fit(d)) {
                return [x.into(), y.into(), c.into(), d.into()];
            }
        }
        let (pb, qb) = (p.to_bigint(), q.to_bigint());
        let e = pb.extended_gcd(&qb);
        let g = e.gcd;
        let c = -(&qb / &g);
        let d = &pb / &g;
        [e.x.into(), e.y.into(), c.into(), d.into()]
    }

    fn to_i64(&self) -> Option<i64> {
        match self {
            Integer::Small(v) => Some(*v),
            Integer::Big(_) => None,
        }
    }

    fn is_odd(&self) -> bool {
        match self {
            Integer::Small(v) => v & 1 == 1,
            Integer::Big(b) => b.is_odd(),
        }
    }
}

/// Extended Euclid on `i128`: returns `(g, x, y)` with `g > 0` and
/// `x*a + y*b = g`.
fn ext_gcd_i128(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Element of the two-element field.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Z2(pub bool);

impl fmt::Debug for Z2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 as u8)
    }
}

impl Coefficient for Z2 {
    const RING: Ring = Ring::Z2;

    fn zero() -> Self {
        Z2(false)
    }

    fn one() -> Self {
        Z2(true)
    }

    fn from_i64(v: i64) -> Self {
        Z2(v & 1 == 1)
    }

    fn is_zero(&self) -> bool {
        !self.0
    }

    fn add(&self, other: &Self) -> Self {
        Z2(self.0 ^ other.0)
    }

    fn mul(&self, other: &Self) -> Self {
        Z2(self.0 & other.0)
    }

    fn neg(&self) -> Self {
        *self
    }

    fn divides(&self, other: &Self) -> bool {
        self.0 || !other.0
    }

    fn quotient_of(&self, other: &Self) -> Self {
        *other
    }

    fn bezout(_p: &Self, _q: &Self) -> [Self; 4] {
        [Z2(true), Z2(false), Z2(true), Z2(true)]
    }

    fn to_i64(&self) -> Option<i64> {
        Some(self.0 as i64)
    }

    fn is_odd(&self) -> bool {
        self.0
    }
}

/// Reduce an integer cochain coefficient into any ring.
pub fn reduce_into<C: Coefficient>(v: &Integer) -> C {
    match C::RING {
        Ring::Z2 => C::from_i64(v.is_odd() as i64),
        Ring::Integers => match v.to_i64() {
            Some(s) => C::from_i64(s),
            None => {
                let b = v.to_bigint();
                let mut acc = C::zero();
                let base = C::from_i64(1 << 32);
                let (sign, digits) = b.to_u32_digits();
                for d in digits.iter().rev() {
                    acc = acc.mul(&base).add(&C::from_i64(*d as i64));
                }
                if sign == num_bigint::Sign::Minus {
                    acc.neg()
                } else {
                    acc
                }
            }
        },
    }
}

impl Integer {
    pub fn abs(&self) -> Integer {
        match self {
            Integer::Small(v) if *v >= 0 => self.clone(),
            Integer::Small(_) => self.neg(),
            Integer::Big(b) => Integer::from_big(b.abs()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn overflow_promotes_to_big() {
        let a = Integer::Small(i64::MAX);
        let s = a.add(&Integer::one());
        assert!(s.is_big());
        assert_eq!(s.add(&Integer::from(-1)), a);
        let p = a.mul(&a);
        assert_eq!(
            p.to_bigint(),
            BigInt::from(i64::MAX) * BigInt::from(i64::MAX)
        );
        assert_eq!(
            Integer::Small(i64::MIN).neg().to_bigint(),
            -BigInt::from(i64::MIN)
        );
    }

    #[test]
    fn bezout_when_divisible_keeps_first_column() {
        let [a, b, c, d] = Integer::bezout(&2.into(), &6.into());
        assert_eq!((a, b, c, d), (1.into(), 0.into(), (-3).into(), 1.into()));
    }

    #[test]
    fn bezout_four_six() {
        let (p, q) = (Integer::from(4), Integer::from(6));
        let [a, b, c, d] = Integer::bezout(&p, &q);
        assert_eq!(a.mul(&p).add(&b.mul(&q)), Integer::from(2));
        assert!(c.mul(&p).add(&d.mul(&q)).is_zero());
        let det = a.mul(&d).sub(&b.mul(&c));
        assert!(det == Integer::one() || det == Integer::one().neg());
    }

    #[test]
    fn z2_arithmetic() {
        assert!(Z2::one().add(&Z2::one()).is_zero());
        assert!(Z2::one().divides(&Z2::one()));
        assert!(!Z2::zero().divides(&Z2::one()));
    }

    proptest! {
        #[test]
        fn bezout_is_unimodular(p in -1000i64..1000, q in -1000i64..1000) {
            prop_assume!(p != 0 && q != 0);
            let (p, q) = (Integer::from(p), Integer::from(q));
            let [a, b, c, d] = Integer::bezout(&p, &q);
            let g = a.mul(&p).add(&b.mul(&q));
            let gb = p.to_bigint().gcd(&q.to_bigint());
            prop_assert_eq!(g.abs().to_bigint(), gb);
            prop_assert!(c.mul(&p).add(&d.mul(&q)).is_zero());
            let det = a.mul(&d).sub(&b.mul(&c)).abs();
            prop_assert_eq!(det, Integer::one());
        }

        #[test]
        fn big_and_small_agree(a in any::<i64>(), b in any::<i64>()) {
            let (x, y) = (Integer::from(a), Integer::from(b));
            prop_assert_eq!(x.add(&y).to_bigint(), BigInt::from(a) + BigInt::from(b));
            prop_assert_eq!(x.mul(&y).to_bigint(), BigInt::from(a) * BigInt::from(b));
            prop_assert_eq!(reduce_into::<Integer>(&x.mul(&y)), x.mul(&y));
        }
    }
}
