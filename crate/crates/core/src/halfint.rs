//! Half-integral symmetric 2×2 matrices `[[a, b/2], [b/2, c]]`, stored with the
//! off-diagonal doubled.

use crate::error::{Error, Result};
use crate::nt;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfIntMat {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumMode {
    Reduced,
    Full,
}

impl HalfIntMat {
    /// Checked constructor: the matrix must be positive semidefinite.
    pub fn new(a: i64, b: i64, c: i64) -> Result<Self> {
        let t = HalfIntMat { a, b, c };
        if a < 0 || c < 0 || t.discriminant() < 0 {
            return Err(Error::NotSemidefinite { a, b, c });
        }
        Ok(t)
    }

    pub const fn new_unchecked(a: i64, b: i64, c: i64) -> Self {
        HalfIntMat { a, b, c }
    }

    pub const ZERO: HalfIntMat = HalfIntMat { a: 0, b: 0, c: 0 };

    /// 4ac − b², i.e. four times the determinant.
    pub fn discriminant(&self) -> i64 {
        4 * self.a * self.c - self.b * self.b
    }

    /// gcd(a, b, c); 0 for the zero matrix.
    pub fn content(&self) -> i64 {
        nt::gcd(nt::gcd(self.a, self.b), self.c)
    }

    pub fn rank(&self) -> u8 {
        if self.a == 0 && self.b == 0 && self.c == 0 {
            0
        } else if self.discriminant() == 0 {
            1
        } else {
            2
        }
    }

    /// Sort key used everywhere for deterministic ordering.
    pub fn ord_key(&self) -> (i64, i64, i64) {
        (self.a, self.c, self.b)
    }

    /// Reduced representative of the GL2(Z)-class and the determinant of the
    /// transform used (the sign is only meaningful up to automorphisms).
    pub fn reduce(&self) -> Result<(HalfIntMat, i8)> {
        let HalfIntMat { mut a, mut b, mut c } = *self;
        if a < 0 || c < 0 || self.discriminant() < 0 {
            return Err(Error::NotSemidefinite { a, b, c });
        }
        loop {
            if a == 0 {
                // Semidefinite with a = 0 forces b = 0.
                break;
            }
            if b.abs() > a {
                // Translate b into (−a, a].
                let k = (a - b).div_euclid(2 * a);
                c += k * b + k * k * a;
                b += 2 * k * a;
            }
            if a > c {
                // Proper swap [[0,−1],[1,0]].
                std::mem::swap(&mut a, &mut c);
                b = -b;
            } else {
                break;
            }
        }
        let mut sign = 1;
        if b < 0 {
            b = -b;
            sign = -1;
        }
        Ok((HalfIntMat { a, b, c }, sign))
    }

    pub fn is_reduced(&self) -> bool {
        0 <= self.b && self.b <= self.a && self.a <= self.c
    }

    /// Canonical text key "a,b,c".
    pub fn key_text(&self) -> String {
        format!("{},{},{}", self.a, self.b, self.c)
    }

    pub fn parse_key(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        let bad = || Error::InvalidArgument(format!("bad matrix key {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<i64> = parts.iter().map(|x| x.trim().parse::<i64>().map_err(|_| bad())).collect::<Result<_>>()?;
        HalfIntMat::new(v[0], v[1], v[2])
    }
}

impl fmt::Display for HalfIntMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.a, self.b, self.c)
    }
}

pub fn discriminant(t: &HalfIntMat) -> i64 {
    t.discriminant()
}

pub fn content(t: &HalfIntMat) -> i64 {
    t.content()
}

pub fn reduce(t: &HalfIntMat) -> Result<(HalfIntMat, i8)> {
    t.reduce()
}

/// Index matrices with diagonal entries at most `bound`, sorted by (a, c, b).
pub fn enumerate(bound: usize, mode: EnumMode) -> Vec<HalfIntMat> {
    let bd = bound as i64;
    let mut out = Vec::new();
    for a in 0..=bd {
        for c in 0..=bd {
            match mode {
                EnumMode::Full => {
                    let m = nt::isqrt((4 * a * c) as u64) as i64;
                    for b in -m..=m {
                        out.push(HalfIntMat { a, b, c });
                    }
                }
                EnumMode::Reduced => {
                    if a <= c {
                        for b in 0..=a {
                            out.push(HalfIntMat { a, b, c });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Reduced matrices with max(a, c) ≤ bound.
pub fn reduced_keys(bound: usize) -> Vec<HalfIntMat> {
    enumerate(bound, EnumMode::Reduced)
}
