//! Small integer number theory.

use num_bigint::BigInt;
use num_traits::{One, Zero};

pub fn gcd(a: i64, b: i64) -> i64 {
    num_integer::gcd(a, b)
}

pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Prime factorization by trial division, as (prime, exponent) pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&n| is_prime(n)).collect()
}

/// Positive divisors in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (q, e) in factorize(n) {
        let len = ds.len();
        let mut pw = 1;
        for _ in 0..e {
            pw *= q;
            for i in 0..len {
                ds.push(ds[i] * pw);
            }
        }
    }
    ds.sort_unstable();
    ds
}

pub fn moebius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// σ_r(n) = Σ_{d|n} d^r.
pub fn sigma(r: u32, n: u64) -> BigInt {
    divisors(n).into_iter().map(|d| BigInt::from(d).pow(r)).fold(BigInt::zero(), |s, x| s + x)
}

/// Kronecker symbol (d / n) for n ≥ 1.
pub fn kronecker(d: i64, n: u64) -> i64 {
    if n == 0 {
        return i64::from(d == 1 || d == -1);
    }
    let mut n = n;
    let mut res = 1i64;
    while n % 2 == 0 {
        n /= 2;
        let r = d.rem_euclid(8);
        if d % 2 == 0 {
            return 0;
        }
        if r == 3 || r == 5 {
            res = -res;
        }
    }
    // Jacobi symbol (d / n) for odd n.
    let mut a = d.rem_euclid(n as i64) as u64;
    let mut m = n;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if m % 8 == 3 || m % 8 == 5 {
                res = -res;
            }
        }
        std::mem::swap(&mut a, &mut m);
        if a % 4 == 3 && m % 4 == 3 {
            res = -res;
        }
        a %= m;
    }
    if m == 1 {
        res
    } else {
        0
    }
}

pub fn is_fundamental_discriminant(d: i64) -> bool {
    if d == 1 {
        return true;
    }
    if d == 0 {
        return false;
    }
    let squarefree = |m: u64| factorize(m).iter().all(|&(_, e)| e == 1);
    match d.rem_euclid(4) {
        1 => squarefree(d.unsigned_abs()),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && squarefree(m.unsigned_abs())
        }
        _ => false,
    }
}

/// Writes a discriminant `n ≡ 0, 1 mod 4` (n ≠ 0) as `d f²` with `d` fundamental.
pub fn fundamental_part(n: i64) -> Option<(i64, u64)> {
    if n == 0 || !matches!(n.rem_euclid(4), 0 | 1) {
        return None;
    }
    let mut core: i64 = n.signum();
    let mut f: u64 = 1;
    for (q, e) in factorize(n.unsigned_abs()) {
        if e % 2 == 1 {
            core *= q as i64;
        }
        f *= q.pow(e / 2);
    }
    if core.rem_euclid(4) == 1 {
        Some((core, f))
    } else {
        // n ≡ 0 mod 4 forces 2 | f here.
        Some((4 * core, f / 2))
    }
}

/// Exact integer power with BigInt result.
pub fn big_pow(base: i64, e: u32) -> BigInt {
    let mut r = BigInt::one();
    let b = BigInt::from(base);
    for _ in 0..e {
        r *= &b;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_functions() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(sigma(3, 2), BigInt::from(9));
        assert_eq!(moebius(30), -1);
        assert_eq!(moebius(12), 0);
        assert_eq!(moebius(1), 1);
    }

    #[test]
    fn kronecker_matches_residue_count() {
        // For prime q odd, (d/q) = 1 iff d is a nonzero square mod q.
        for q in [3u64, 5, 7, 11, 13] {
            for d in -30i64..30 {
                let r = d.rem_euclid(q as i64) as u64;
                let expect = if r == 0 {
                    0
                } else if (1..q).any(|x| x * x % q == r) {
                    1
                } else {
                    -1
                };
                assert_eq!(kronecker(d, q), expect, "d={d} q={q}");
            }
        }
        assert_eq!(kronecker(-3, 2), -1);
        assert_eq!(kronecker(-4, 2), 0);
        assert_eq!(kronecker(5, 4), 1);
    }

    #[test]
    fn fundamental_parts() {
        assert_eq!(fundamental_part(-3), Some((-3, 1)));
        assert_eq!(fundamental_part(-4), Some((-4, 1)));
        assert_eq!(fundamental_part(-12), Some((-3, 2)));
        assert_eq!(fundamental_part(-16), Some((-4, 2)));
        assert_eq!(fundamental_part(-27), Some((-3, 3)));
        assert_eq!(fundamental_part(-32), Some((-8, 2)));
        assert_eq!(fundamental_part(5), Some((5, 1)));
        assert_eq!(fundamental_part(-2), None);
        for n in -400i64..0 {
            if let Some((d, f)) = fundamental_part(n) {
                assert!(is_fundamental_discriminant(d));
                assert_eq!(d * (f * f) as i64, n);
            }
        }
    }

    #[test]
    fn isqrt_exact() {
        for n in 0..2000u64 {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n);
        }
    }
}
