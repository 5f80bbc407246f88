//! Prime-field scalar helpers. Moduli are assumed below 2^32.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

#[inline]
pub fn mul(a: u64, b: u64, p: u64) -> u64 {
    a * b % p
}

#[inline]
pub fn add(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline]
pub fn sub(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

#[inline]
pub fn neg(a: u64, p: u64) -> u64 {
    if a == 0 {
        0
    } else {
        p - a
    }
}

pub fn pow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Inverse of a nonzero residue (p prime).
pub fn inv(a: u64, p: u64) -> u64 {
    assert!(a % p != 0, "inverse of zero mod {p}");
    pow(a, p - 2, p)
}

pub fn from_i64(a: i64, p: u64) -> u64 {
    a.rem_euclid(p as i64) as u64
}

pub fn from_bigint(a: &BigInt, p: u64) -> u64 {
    a.mod_floor(&BigInt::from(p)).to_u64().unwrap()
}

/// Reduction of a rational; `None` when p divides the denominator.
pub fn from_rational(q: &BigRational, p: u64) -> Option<u64> {
    let d = from_bigint(q.denom(), p);
    if d == 0 {
        return None;
    }
    Some(mul(from_bigint(q.numer(), p), inv(d, p), p))
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(q: &BigRational, p: u64) -> i64 {
    assert!(!q.is_zero());
    let pb = BigInt::from(p);
    let count = |x: &BigInt| {
        let mut x = x.abs();
        let mut v = 0i64;
        while (&x % &pb).is_zero() {
            x /= &pb;
            v += 1;
        }
        v
    };
    count(q.numer()) - count(q.denom())
}

/// Symmetric representative in (-p/2, p/2].
pub fn centered(a: u64, p: u64) -> i64 {
    if a > p / 2 {
        a as i64 - p as i64
    } else {
        a as i64
    }
}
