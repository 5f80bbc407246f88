//! Truncated Fourier expansions in degree 2 (and degree 1) over Q or F_p.
//!
//! Coefficients live on the full key set `0 ≤ a, c ≤ B`, `b² ≤ 4ac`, laid out in
//! (a, c, b) order so that each (a, c) block is a contiguous run over b.

use crate::error::{Error, Result};
use crate::halfint::HalfIntMat;
use crate::{modp, nt, ringmodp};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, LazyLock, Mutex};

/// Largest bound the u64 block accumulator in the convolution tolerates.
pub const MAX_BOUND: usize = 60;

#[derive(Debug)]
pub struct KeyLayout {
    pub bound: usize,
    block_start: Vec<usize>,
    half_width: Vec<i64>,
    keys: Vec<HalfIntMat>,
}

static LAYOUTS: LazyLock<Mutex<HashMap<usize, Arc<KeyLayout>>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

impl KeyLayout {
    /// Shared layout for a bound.
    pub fn get(bound: usize) -> Arc<KeyLayout> {
        assert!(bound <= MAX_BOUND, "bound {bound} exceeds {MAX_BOUND}");
        let mut map = LAYOUTS.lock().unwrap();
        map.entry(bound).or_insert_with(|| Arc::new(KeyLayout::build(bound))).clone()
    }

    fn build(bound: usize) -> Self {
        let n = bound + 1;
        let mut block_start = Vec::with_capacity(n * n + 1);
        let mut half_width = Vec::with_capacity(n * n);
        let mut keys = Vec::new();
        for a in 0..n as i64 {
            for c in 0..n as i64 {
                block_start.push(keys.len());
                let m = nt::isqrt((4 * a * c) as u64) as i64;
                half_width.push(m);
                for b in -m..=m {
                    keys.push(HalfIntMat::new_unchecked(a, b, c));
                }
            }
        }
        block_start.push(keys.len());
        KeyLayout { bound, block_start, half_width, keys }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[HalfIntMat] {
        &self.keys
    }

    #[inline]
    fn block(&self, a: i64, c: i64) -> (usize, i64) {
        let i = a as usize * (self.bound + 1) + c as usize;
        (self.block_start[i], self.half_width[i])
    }

    pub fn index(&self, t: &HalfIntMat) -> Option<usize> {
        let bd = self.bound as i64;
        if t.a < 0 || t.c < 0 || t.a > bd || t.c > bd {
            return None;
        }
        let (s, m) = self.block(t.a, t.c);
        (t.b.abs() <= m).then(|| s + (t.b + m) as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coeffs {
    Rational(Vec<BigRational>),
    Modp(Vec<u64>),
}

#[derive(Clone, Debug)]
pub struct QExp2 {
    weight: i64,
    char_p: u64,
    layout: Arc<KeyLayout>,
    coeffs: Coeffs,
}

impl PartialEq for QExp2 {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight
            && self.char_p == other.char_p
            && self.bound() == other.bound()
            && self.coeffs == other.coeffs
    }
}

impl QExp2 {
    pub fn zero(weight: i64, char_p: u64, bound: usize) -> Self {
        let layout = KeyLayout::get(bound);
        let n = layout.len();
        let coeffs =
            if char_p == 0 { Coeffs::Rational(vec![BigRational::zero(); n]) } else { Coeffs::Modp(vec![0; n]) };
        QExp2 { weight, char_p, layout, coeffs }
    }

    /// The constant expansion `value` (weight label given by the caller).
    pub fn constant(weight: i64, char_p: u64, bound: usize, value: i64) -> Self {
        let mut f = Self::zero(weight, char_p, bound);
        match &mut f.coeffs {
            Coeffs::Rational(v) => v[0] = BigRational::from_integer(value.into()),
            Coeffs::Modp(v) => v[0] = modp::from_i64(value, char_p),
        }
        f
    }

    pub fn one(char_p: u64, bound: usize) -> Self {
        Self::constant(0, char_p, bound, 1)
    }

    pub fn from_fn_q(weight: i64, bound: usize, f: impl Fn(&HalfIntMat) -> BigRational) -> Self {
        let layout = KeyLayout::get(bound);
        let v = layout.keys().iter().map(f).collect();
        QExp2 { weight, char_p: 0, layout, coeffs: Coeffs::Rational(v) }
    }

    pub fn from_fn_p(weight: i64, p: u64, bound: usize, f: impl Fn(&HalfIntMat) -> u64) -> Self {
        let layout = KeyLayout::get(bound);
        let v = layout.keys().iter().map(|t| f(t) % p).collect();
        QExp2 { weight, char_p: p, layout, coeffs: Coeffs::Modp(v) }
    }

    pub fn from_values_p(weight: i64, p: u64, bound: usize, v: Vec<u64>) -> Self {
        let layout = KeyLayout::get(bound);
        assert_eq!(v.len(), layout.len());
        QExp2 { weight, char_p: p, layout, coeffs: Coeffs::Modp(v) }
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn characteristic(&self) -> u64 {
        self.char_p
    }

    pub fn bound(&self) -> usize {
        self.layout.bound
    }

    pub fn layout(&self) -> &KeyLayout {
        &self.layout
    }

    pub fn keys(&self) -> &[HalfIntMat] {
        self.layout.keys()
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.coeffs
    }

    pub fn with_weight(mut self, weight: i64) -> Self {
        self.weight = weight;
        self
    }

    pub fn values_p(&self) -> &[u64] {
        match &self.coeffs {
            Coeffs::Modp(v) => v,
            Coeffs::Rational(_) => panic!("values_p on a characteristic-0 expansion"),
        }
    }

    pub fn values_q(&self) -> &[BigRational] {
        match &self.coeffs {
            Coeffs::Rational(v) => v,
            Coeffs::Modp(_) => panic!("values_q on a characteristic-p expansion"),
        }
    }

    /// Coefficient at `t` (char 0); zero outside the stored range of a valid key.
    pub fn coeff_q(&self, t: &HalfIntMat) -> BigRational {
        match self.layout.index(t) {
            Some(i) => self.values_q()[i].clone(),
            None => {
                assert!(
                    t.discriminant() >= 0 && t.a <= self.bound() as i64 && t.c <= self.bound() as i64,
                    "key {t} outside bound {}",
                    self.bound()
                );
                BigRational::zero()
            }
        }
    }

    pub fn coeff_p(&self, t: &HalfIntMat) -> u64 {
        match self.layout.index(t) {
            Some(i) => self.values_p()[i],
            None => panic!("key {t} outside bound {}", self.bound()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.coeffs {
            Coeffs::Rational(v) => v.iter().all(|x| x.is_zero()),
            Coeffs::Modp(v) => v.iter().all(|&x| x == 0),
        }
    }

    pub fn truncate(&self, bound: usize) -> Result<QExp2> {
        if bound > self.bound() {
            return Err(Error::BoundTooSmall { have: self.bound(), need: bound });
        }
        if bound == self.bound() {
            return Ok(self.clone());
        }
        let layout = KeyLayout::get(bound);
        let idx: Vec<usize> = layout.keys().iter().map(|t| self.layout.index(t).unwrap()).collect();
        let coeffs = match &self.coeffs {
            Coeffs::Rational(v) => Coeffs::Rational(idx.iter().map(|&i| v[i].clone()).collect()),
            Coeffs::Modp(v) => Coeffs::Modp(idx.iter().map(|&i| v[i]).collect()),
        };
        Ok(QExp2 { weight: self.weight, char_p: self.char_p, layout, coeffs })
    }

    /// Coefficient-wise transform in characteristic p.
    pub fn map_p(&self, weight: i64, f: impl Fn(&HalfIntMat, u64) -> u64) -> QExp2 {
        let v = self.keys().iter().zip(self.values_p()).map(|(t, &x)| f(t, x)).collect();
        QExp2 { weight, char_p: self.char_p, layout: self.layout.clone(), coeffs: Coeffs::Modp(v) }
    }

    /// Coefficient-wise transform in characteristic 0.
    pub fn map_q(&self, weight: i64, f: impl Fn(&HalfIntMat, &BigRational) -> BigRational) -> QExp2 {
        let v = self.keys().iter().zip(self.values_q()).map(|(t, x)| f(t, x)).collect();
        QExp2 { weight, char_p: 0, layout: self.layout.clone(), coeffs: Coeffs::Rational(v) }
    }

    /// Σ s_i F_i at the minimum bound. Scalars are reduced mod p in characteristic p.
    pub fn linear_combine(terms: &[(BigRational, &QExp2)]) -> Result<QExp2> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::InvalidArgument("empty linear combination".into()));
        };
        let (w, ch) = (first.weight, first.char_p);
        for (_, f) in terms {
            if f.char_p != ch {
                return Err(Error::CharMismatch(ch, f.char_p));
            }
            if f.weight != w {
                return Err(Error::WeightMismatch(w, f.weight));
            }
        }
        let bound = terms.iter().map(|(_, f)| f.bound()).min().unwrap();
        let mut out = QExp2::zero(w, ch, bound);
        for (s, f) in terms {
            let f = f.truncate(bound)?;
            match (&mut out.coeffs, &f.coeffs) {
                (Coeffs::Rational(o), Coeffs::Rational(v)) => {
                    if s.is_zero() {
                        continue;
                    }
                    for (x, y) in o.iter_mut().zip(v) {
                        if !y.is_zero() {
                            *x += s * y;
                        }
                    }
                }
                (Coeffs::Modp(o), Coeffs::Modp(v)) => {
                    let sp = modp::from_rational(s, ch).ok_or(Error::NotIntegral { p: ch })?;
                    for (x, &y) in o.iter_mut().zip(v) {
                        *x = (*x + sp * y) % ch;
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &QExp2) -> Result<QExp2> {
        Self::linear_combine(&[(BigRational::one(), self), (BigRational::one(), other)])
    }

    pub fn sub(&self, other: &QExp2) -> Result<QExp2> {
        Self::linear_combine(&[(BigRational::one(), self), (-BigRational::one(), other)])
    }

    pub fn scale(&self, s: &BigRational) -> Result<QExp2> {
        Self::linear_combine(&[(s.clone(), self)])
    }

    /// Product; weights add and the bound is the minimum of the two bounds.
    pub fn mul(&self, other: &QExp2) -> Result<QExp2> {
        if self.char_p != other.char_p {
            return Err(Error::CharMismatch(self.char_p, other.char_p));
        }
        let bound = self.bound().min(other.bound());
        let weight = self.weight + other.weight;
        let layout = KeyLayout::get(bound);
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coeffs::Modp(f), Coeffs::Modp(g)) => {
                Coeffs::Modp(conv_full(f, &self.layout, g, &other.layout, &layout, self.char_p))
            }
            (Coeffs::Rational(f), Coeffs::Rational(g)) => {
                Coeffs::Rational(exact_product(f, &self.layout, g, &other.layout, &layout))
            }
            _ => unreachable!(),
        };
        Ok(QExp2 { weight, char_p: self.char_p, layout, coeffs })
    }

    pub fn pow(&self, e: u32) -> Result<QExp2> {
        let mut acc = QExp2::one(self.char_p, self.bound());
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Product coefficients at the given keys only (characteristic p).
    pub fn mul_at_keys(&self, other: &QExp2, keys: &[HalfIntMat]) -> Result<Vec<u64>> {
        if self.char_p != other.char_p || self.char_p == 0 {
            return Err(Error::CharMismatch(self.char_p, other.char_p));
        }
        let bound = self.bound().min(other.bound()) as i64;
        if let Some(t) = keys.iter().find(|t| t.a > bound || t.c > bound) {
            return Err(Error::BoundTooSmall { have: bound as usize, need: t.a.max(t.c) as usize });
        }
        let (f, g) = (self.values_p(), other.values_p());
        let sf = support_min(f, &self.layout);
        let sg = support_min(g, &other.layout);
        let p = self.char_p;
        Ok(keys
            .iter()
            .map(|t| match (sf, sg) {
                (Some(sf), Some(sg)) => {
                    (conv_at(f, &self.layout, sf, g, &other.layout, sg, t.a, t.b, t.c) % p as u128) as u64
                }
                _ => 0,
            })
            .collect())
    }

    /// m ↦ a(0, 0, m).
    pub fn phi(&self) -> QExp1 {
        let bd = self.bound() as i64;
        let coeffs = match &self.coeffs {
            Coeffs::Rational(v) => Coeffs::Rational(
                (0..=bd).map(|m| v[self.layout.index(&HalfIntMat::new_unchecked(0, 0, m)).unwrap()].clone()).collect(),
            ),
            Coeffs::Modp(v) => Coeffs::Modp(
                (0..=bd).map(|m| v[self.layout.index(&HalfIntMat::new_unchecked(0, 0, m)).unwrap()]).collect(),
            ),
        };
        QExp1 { weight: self.weight, char_p: self.char_p, coeffs }
    }

    /// Minimal p-adic valuation of the coefficients; `None` for the zero expansion.
    pub fn nu_p(&self, p: u64) -> Option<i64> {
        self.values_q().iter().filter(|x| !x.is_zero()).map(|x| modp::valuation(x, p)).min()
    }

    pub fn reduce_mod(&self, p: u64) -> Result<QExp2> {
        if self.char_p == p {
            return Ok(self.clone());
        }
        if self.char_p != 0 {
            return Err(Error::CharMismatch(self.char_p, p));
        }
        let v = self
            .values_q()
            .iter()
            .map(|x| modp::from_rational(x, p).ok_or(Error::NotIntegral { p }))
            .collect::<Result<Vec<u64>>>()?;
        Ok(QExp2 { weight: self.weight, char_p: p, layout: self.layout.clone(), coeffs: Coeffs::Modp(v) })
    }

    /// The three coefficient-scaled expansions (a·a(T), b·a(T), c·a(T)), each of
    /// weight label k + 1.
    pub fn derivatives(&self) -> (QExp2, QExp2, QExp2) {
        let w = self.weight + 1;
        match &self.coeffs {
            Coeffs::Rational(_) => (
                self.map_q(w, |t, x| x * BigInt::from(t.a)),
                self.map_q(w, |t, x| x * BigInt::from(t.b)),
                self.map_q(w, |t, x| x * BigInt::from(t.c)),
            ),
            Coeffs::Modp(_) => {
                let p = self.char_p;
                (
                    self.map_p(w, |t, x| x * modp::from_i64(t.a, p) % p),
                    self.map_p(w, |t, x| x * modp::from_i64(t.b, p) % p),
                    self.map_p(w, |t, x| x * modp::from_i64(t.c, p) % p),
                )
            }
        }
    }

    /// Checks a(a, −b, c) = ±a(a, b, c) with the sign (−1)^weight.
    pub fn check_parity(&self) -> bool {
        let odd = self.weight.rem_euclid(2) == 1;
        self.keys().iter().enumerate().all(|(i, t)| {
            if t.b <= 0 {
                return true;
            }
            let j = self.layout.index(&HalfIntMat::new_unchecked(t.a, -t.b, t.c)).unwrap();
            match &self.coeffs {
                Coeffs::Rational(v) => {
                    if odd {
                        v[i] == -v[j].clone()
                    } else {
                        v[i] == v[j]
                    }
                }
                Coeffs::Modp(v) => {
                    if odd {
                        v[i] == modp::neg(v[j], self.char_p)
                    } else {
                        v[i] == v[j]
                    }
                }
            }
        })
    }

    /// Residues mod p at the given keys; the expansion may be of char 0 or char p.
    pub fn residues_at(&self, p: u64, keys: &[HalfIntMat]) -> Result<Vec<u64>> {
        keys.iter()
            .map(|t| {
                let i = self
                    .layout
                    .index(t)
                    .ok_or(Error::BoundTooSmall { have: self.bound(), need: t.a.max(t.c) as usize })?;
                match &self.coeffs {
                    Coeffs::Modp(v) if self.char_p == p => Ok(v[i]),
                    Coeffs::Modp(_) => Err(Error::CharMismatch(self.char_p, p)),
                    Coeffs::Rational(v) => modp::from_rational(&v[i], p).ok_or(Error::NotIntegral { p }),
                }
            })
            .collect()
    }

    pub fn serialize(&self) -> String {
        let mut s = format!("qexp2 weight={} char={} bound={}\n", self.weight, self.char_p, self.bound());
        for (i, t) in self.keys().iter().enumerate() {
            match &self.coeffs {
                Coeffs::Rational(v) if !v[i].is_zero() => {
                    writeln!(s, "{} {}/{}", t.key_text(), v[i].numer(), v[i].denom()).unwrap();
                }
                Coeffs::Modp(v) if v[i] != 0 => {
                    writeln!(s, "{} {}", t.key_text(), v[i]).unwrap();
                }
                _ => {}
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<QExp2> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let (weight, char_p, bound) = parse_header(header, "qexp2")?;
        if bound > MAX_BOUND {
            return Err(Error::Parse { line: 1, msg: format!("bound {bound} too large") });
        }
        let mut f = QExp2::zero(weight, char_p, bound);
        let mut last: Option<usize> = None;
        for (ln, line) in lines {
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let (key, val) = line.trim().split_once(' ').ok_or_else(|| perr("expected `a,b,c value`".into()))?;
            let t = HalfIntMat::parse_key(key).map_err(|e| perr(e.to_string()))?;
            let i = f.layout.index(&t).ok_or_else(|| perr(format!("key {t} outside bound {bound}")))?;
            if last.is_some_and(|l| l >= i) {
                return Err(perr("keys not strictly sorted by (a, c, b)".into()));
            }
            last = Some(i);
            match &mut f.coeffs {
                Coeffs::Rational(v) => {
                    v[i] = parse_rational(val.trim()).ok_or_else(|| perr(format!("bad rational {val:?}")))?
                }
                Coeffs::Modp(v) => {
                    let x: u64 = val.trim().parse().map_err(|_| perr(format!("bad residue {val:?}")))?;
                    if x >= char_p {
                        return Err(perr(format!("residue {x} not reduced mod {char_p}")));
                    }
                    v[i] = x;
                }
            }
        }
        Ok(f)
    }
}

/// True iff F ≡ G mod p on reduced keys up to the Sturm bound of the larger weight.
///
/// Weights may differ by a multiple of p − 1. Nonzero forms whose weights are
/// incongruent mod p − 1 are never congruent; only a vanishing pair is.
pub fn congruent_mod_p(f: &QExp2, g: &QExp2, p: u64) -> Result<bool> {
    let (wf, wg) = (f.weight(), g.weight());
    let b = ringmodp::sturm_bound(wf.max(wg));
    let have = f.bound().min(g.bound());
    if have < b {
        return Err(Error::BoundTooSmall { have, need: b });
    }
    let keys = crate::halfint::reduced_keys(b);
    let (rf, rg) = (f.residues_at(p, &keys)?, g.residues_at(p, &keys)?);
    if (wf - wg).rem_euclid(p as i64 - 1) != 0 {
        return Ok(rf.iter().chain(&rg).all(|&x| x == 0));
    }
    Ok(rf == rg)
}

fn parse_header(line: &str, tag: &str) -> Result<(i64, u64, usize)> {
    let err = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(err(&format!("expected `{tag}` header")));
    }
    let mut get = |name: &str| -> Result<String> {
        let field = it.next().ok_or_else(|| err(&format!("missing {name}")))?;
        field.strip_prefix(&format!("{name}=")).map(str::to_string).ok_or_else(|| err(&format!("expected {name}=")))
    };
    let weight = get("weight")?.parse().map_err(|_| err("bad weight"))?;
    let char_p: u64 = get("char")?.parse().map_err(|_| err("bad char"))?;
    let bound = get("bound")?.parse().map_err(|_| err("bad bound"))?;
    if char_p != 0 && !nt::is_prime(char_p) {
        return Err(err("char must be 0 or a prime"));
    }
    Ok((weight, char_p, bound))
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

/// Truncated degree-1 expansion Σ a(n) qⁿ, n ≤ bound.
#[derive(Clone, Debug, PartialEq)]
pub struct QExp1 {
    pub weight: i64,
    pub char_p: u64,
    pub coeffs: Coeffs,
}

impl QExp1 {
    pub fn from_rationals(weight: i64, v: Vec<BigRational>) -> Self {
        QExp1 { weight, char_p: 0, coeffs: Coeffs::Rational(v) }
    }

    pub fn bound(&self) -> usize {
        match &self.coeffs {
            Coeffs::Rational(v) => v.len() - 1,
            Coeffs::Modp(v) => v.len() - 1,
        }
    }

    pub fn values_q(&self) -> &[BigRational] {
        match &self.coeffs {
            Coeffs::Rational(v) => v,
            Coeffs::Modp(_) => panic!("values_q on a characteristic-p series"),
        }
    }

    pub fn truncate(&self, bound: usize) -> QExp1 {
        let coeffs = match &self.coeffs {
            Coeffs::Rational(v) => Coeffs::Rational(v[..=bound].to_vec()),
            Coeffs::Modp(v) => Coeffs::Modp(v[..=bound].to_vec()),
        };
        QExp1 { weight: self.weight, char_p: self.char_p, coeffs }
    }

    pub fn mul(&self, other: &QExp1) -> Result<QExp1> {
        if self.char_p != other.char_p {
            return Err(Error::CharMismatch(self.char_p, other.char_p));
        }
        let n = self.bound().min(other.bound()) + 1;
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coeffs::Rational(f), Coeffs::Rational(g)) => {
                Coeffs::Rational((0..n).map(|k| (0..=k).map(|i| &f[i] * &g[k - i]).sum()).collect())
            }
            (Coeffs::Modp(f), Coeffs::Modp(g)) => {
                let p = self.char_p;
                Coeffs::Modp((0..n).map(|k| (0..=k).fold(0, |s, i| (s + f[i] * g[k - i]) % p)).collect())
            }
            _ => unreachable!(),
        };
        Ok(QExp1 { weight: self.weight + other.weight, char_p: self.char_p, coeffs })
    }

    pub fn serialize(&self) -> String {
        let mut s = format!("qexp1 weight={} char={} bound={}\n", self.weight, self.char_p, self.bound());
        match &self.coeffs {
            Coeffs::Rational(v) => {
                for (n, x) in v.iter().enumerate().filter(|(_, x)| !x.is_zero()) {
                    writeln!(s, "{n} {}/{}", x.numer(), x.denom()).unwrap();
                }
            }
            Coeffs::Modp(v) => {
                for (n, x) in v.iter().enumerate().filter(|(_, x)| **x != 0) {
                    writeln!(s, "{n} {x}").unwrap();
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<QExp1> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let (weight, char_p, bound) = parse_header(header, "qexp1")?;
        let mut rat = vec![BigRational::zero(); bound + 1];
        let mut res = vec![0u64; bound + 1];
        for (ln, line) in lines {
            let perr = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
            let (n, val) = line.trim().split_once(' ').ok_or_else(|| perr("expected `n value`"))?;
            let n: usize = n.parse().map_err(|_| perr("bad index"))?;
            if n > bound {
                return Err(perr("index beyond bound"));
            }
            if char_p == 0 {
                rat[n] = parse_rational(val.trim()).ok_or_else(|| perr("bad rational"))?;
            } else {
                res[n] = val.trim().parse().map_err(|_| perr("bad residue"))?;
                if res[n] >= char_p {
                    return Err(perr("residue not reduced"));
                }
            }
        }
        let coeffs = if char_p == 0 { Coeffs::Rational(rat) } else { Coeffs::Modp(res) };
        Ok(QExp1 { weight, char_p, coeffs })
    }
}

/// Smallest a and smallest c among keys with a nonzero coefficient.
fn support_min(v: &[u64], layout: &KeyLayout) -> Option<(i64, i64)> {
    let mut out: Option<(i64, i64)> = None;
    for (t, &x) in layout.keys().iter().zip(v) {
        if x != 0 {
            out = Some(match out {
                None => (t.a, t.c),
                Some((a, c)) => (a.min(t.a), c.min(t.c)),
            });
        }
    }
    out
}

/// Unreduced convolution sum at one output key. Residues must be below 2^28.
#[allow(clippy::too_many_arguments)]
#[inline]
fn conv_at(
    f: &[u64],
    lf: &KeyLayout,
    sf: (i64, i64),
    g: &[u64],
    lg: &KeyLayout,
    sg: (i64, i64),
    a: i64,
    b: i64,
    c: i64,
) -> u128 {
    let mut acc: u128 = 0;
    for a1 in sf.0..=a - sg.0 {
        let a2 = a - a1;
        for c1 in sf.1..=c - sg.1 {
            let c2 = c - c1;
            let (s1, m1) = lf.block(a1, c1);
            let (s2, m2) = lg.block(a2, c2);
            let lo = (-m1).max(b - m2);
            let hi = m1.min(b + m2);
            if lo > hi {
                continue;
            }
            let fs = &f[s1 + (lo + m1) as usize..=s1 + (hi + m1) as usize];
            let gs = &g[s2 + (b - hi + m2) as usize..=s2 + (b - lo + m2) as usize];
            let block: u64 = fs.iter().zip(gs.iter().rev()).map(|(&x, &y)| x * y).sum();
            acc += block as u128;
        }
    }
    acc
}

/// Full convolution of two residue vectors into `out` layout.
fn conv_full(f: &[u64], lf: &KeyLayout, g: &[u64], lg: &KeyLayout, out: &KeyLayout, p: u64) -> Vec<u64> {
    assert!(p < (1 << 28));
    let (Some(sf), Some(sg)) = (support_min(f, lf), support_min(g, lg)) else {
        return vec![0; out.len()];
    };
    let n = out.bound as i64 + 1;
    let blocks: Vec<(i64, i64)> = (0..n).flat_map(|a| (0..n).map(move |c| (a, c))).collect();
    let parts: Vec<Vec<u64>> = blocks
        .par_iter()
        .map(|&(a, c)| {
            let (_, m) = out.block(a, c);
            if a < sf.0 + sg.0 || c < sf.1 + sg.1 {
                return vec![0; (2 * m + 1) as usize];
            }
            (-m..=m).map(|b| (conv_at(f, lf, sf, g, lg, sg, a, b, c) % p as u128) as u64).collect()
        })
        .collect();
    parts.concat()
}

/// Primes just below 2^28, descending.
static CRT_PRIMES: LazyLock<Vec<u64>> = LazyLock::new(|| {
    let mut v = Vec::new();
    let mut n = (1u64 << 28) - 1;
    while v.len() < 400 {
        if nt::is_prime(n) {
            v.push(n);
        }
        n -= 2;
    }
    v
});

fn to_integers(v: &[BigRational]) -> (Vec<BigInt>, BigInt) {
    let l = v.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let ints = v.iter().map(|x| x.numer() * (&l / x.denom())).collect();
    (ints, l)
}

fn residues(v: &[BigInt], p: u64) -> Vec<u64> {
    let pb = BigInt::from(p);
    v.iter().map(|x| if x.is_zero() { 0 } else { x.mod_floor(&pb).to_u64().unwrap() }).collect()
}

/// Exact rational product via multi-modular convolution and CRT.
fn exact_product(
    f: &[BigRational],
    lf: &KeyLayout,
    g: &[BigRational],
    lg: &KeyLayout,
    out: &KeyLayout,
) -> Vec<BigRational> {
    let (fi, df) = to_integers(f);
    let (gi, dg) = to_integers(g);
    let bits = |v: &[BigInt]| v.iter().map(|x| x.bits()).max().unwrap_or(0);
    let (bf, bg) = (bits(&fi), bits(&gi));
    if bf == 0 || bg == 0 {
        return vec![BigRational::zero(); out.len()];
    }
    // |coefficient| ≤ max|f|·max|g|·#pairs, and #pairs ≤ #keys.
    let need = bf + bg + 64 - (out.len() as u64).leading_zeros() as u64 + 2;
    let nprimes = need.div_ceil(27) as usize;
    assert!(nprimes <= CRT_PRIMES.len(), "coefficients too large for CRT prime pool");
    let primes = &CRT_PRIMES[..nprimes];
    let images: Vec<Vec<u64>> =
        primes.par_iter().map(|&p| conv_full(&residues(&fi, p), lf, &residues(&gi, p), lg, out, p)).collect();
    // Garner: inv_prefix[i] = (p_0 ⋯ p_{i−1})^{-1} mod p_i.
    let inv_prefix: Vec<u64> = (0..nprimes)
        .map(|i| {
            let prod = primes[..i].iter().fold(1u64, |s, &q| s * (q % primes[i]) % primes[i]);
            if i == 0 {
                1
            } else {
                modp::inv(prod, primes[i])
            }
        })
        .collect();
    let modulus: BigInt = primes.iter().fold(BigInt::one(), |m, &q| m * q);
    let half = &modulus >> 1;
    let denom = df * dg;
    (0..out.len())
        .into_par_iter()
        .map(|k| {
            let mut digits = Vec::with_capacity(nprimes);
            for i in 0..nprimes {
                let p = primes[i];
                // Value of the partial mixed-radix number mod p.
                let mut v = 0u64;
                let mut radix = 1u64;
                for (j, &d) in digits.iter().enumerate() {
                    v = (v + d % p * radix) % p;
                    radix = radix * (primes[j] % p) % p;
                }
                let r = images[i][k];
                digits.push(modp::sub(r, v, p) * inv_prefix[i] % p);
            }
            if digits.iter().all(|&d| d == 0) {
                return BigRational::zero();
            }
            let mut x = BigInt::zero();
            for i in (0..nprimes).rev() {
                x = x * primes[i] + digits[i];
            }
            if x > half {
                x -= &modulus;
            }
            BigRational::new(x, denom.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    /// Direct convolution over key pairs, used as the oracle for `mul`.
    fn naive_mul(f: &QExp2, g: &QExp2) -> QExp2 {
        let bound = f.bound().min(g.bound());
        let mut out = QExp2::zero(f.weight() + g.weight(), 0, bound);
        let layout = KeyLayout::get(bound);
        if let Coeffs::Rational(o) = &mut out.coeffs {
            for t1 in layout.keys() {
                for t2 in layout.keys() {
                    let t = HalfIntMat::new_unchecked(t1.a + t2.a, t1.b + t2.b, t1.c + t2.c);
                    if let Some(i) = layout.index(&t) {
                        o[i] += f.coeff_q(t1) * g.coeff_q(t2);
                    }
                }
            }
        }
        out
    }

    fn random_q(bound: usize, seed: u64, big: bool) -> QExp2 {
        let s = std::cell::Cell::new(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407));
        QExp2::from_fn_q(0, bound, |_| {
            s.set(s.get().wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407));
            let s = s.get();
            let n = ((s >> 33) % 21) as i64 - 10;
            let d = ((s >> 20) % 5) as i64 + 1;
            let x = BigRational::new(n.into(), d.into());
            if big {
                x * BigRational::from_integer(BigInt::from(10).pow(40))
            } else {
                x
            }
        })
    }

    #[test]
    fn layout_indexing() {
        let l = KeyLayout::get(3);
        for (i, t) in l.keys().iter().enumerate() {
            assert_eq!(l.index(t), Some(i));
        }
        assert_eq!(l.index(&HalfIntMat::new_unchecked(4, 0, 0)), None);
        assert_eq!(KeyLayout::get(1).len(), 8);
    }

    #[test]
    fn exact_mul_matches_naive() {
        for seed in 0..4 {
            let f = random_q(3, seed, seed % 2 == 1);
            let g = random_q(4, seed + 100, false);
            assert_eq!(f.mul(&g).unwrap(), naive_mul(&f, &g));
        }
    }

    #[test]
    fn modp_mul_matches_reduction() {
        let f = random_q(4, 1, false);
        let g = random_q(4, 2, false);
        let exact = f.mul(&g).unwrap();
        for p in [7u64, 11, 268435399] {
            let prod = f.reduce_mod(p).unwrap().mul(&g.reduce_mod(p).unwrap()).unwrap();
            assert_eq!(prod, exact.reduce_mod(p).unwrap());
            let keys = crate::halfint::reduced_keys(3);
            let at = f.reduce_mod(p).unwrap().mul_at_keys(&g.reduce_mod(p).unwrap(), &keys).unwrap();
            assert_eq!(at, exact.residues_at(p, &keys).unwrap());
        }
    }

    #[test]
    fn single_terms_multiply_to_sum_key() {
        let t1 = HalfIntMat::new(1, 1, 1).unwrap();
        let t2 = HalfIntMat::new(0, 0, 2).unwrap();
        let f = QExp2::from_fn_q(0, 3, |t| if *t == t1 { q(1) } else { q(0) });
        let g = QExp2::from_fn_q(0, 3, |t| if *t == t2 { q(1) } else { q(0) });
        let h = f.mul(&g).unwrap();
        let t3 = HalfIntMat::new(1, 1, 3).unwrap();
        for t in h.keys() {
            assert_eq!(h.coeff_q(t), if *t == t3 { q(1) } else { q(0) });
        }
    }

    #[test]
    fn serialization_round_trip() {
        let f = QExp2::from_fn_q(4, 2, |t| if t.a == 1 { BigRational::new((-691).into(), 2730.into()) } else { q(0) });
        let s = f.serialize();
        assert!(s.contains("-691/2730"));
        assert_eq!(QExp2::parse(&s).unwrap(), f);
        let z = QExp2::zero(6, 7, 3);
        assert_eq!(z.serialize(), "qexp2 weight=6 char=7 bound=3\n");
        assert_eq!(QExp2::parse(&z.serialize()).unwrap(), z);
        assert!(QExp2::parse("qexp2 weight=4 char=0 bound=1\n2,0,0 1/1\n").is_err());
        assert!(QExp2::parse("qexp2 weight=4 char=7 bound=1\n1,0,1 9\n").is_err());
        assert!(QExp2::parse("qexp1 weight=4 char=0 bound=1\n").is_err());
        let phi = f.phi();
        assert_eq!(QExp1::parse(&phi.serialize()).unwrap(), phi);
    }

    #[test]
    fn valuations_and_reduction() {
        let f = random_q(2, 5, false);
        assert_eq!(QExp2::zero(0, 0, 2).nu_p(5), None);
        let five_f = f.scale(&q(5)).unwrap();
        assert_eq!(five_f.nu_p(5).unwrap(), f.nu_p(5).unwrap() + 1);
        let g = QExp2::from_fn_q(0, 2, |t| q(t.a + 2 * t.c));
        assert!(g.scale(&q(7)).unwrap().reduce_mod(7).unwrap().is_zero());
        assert!(matches!(
            g.scale(&BigRational::new(1.into(), 7.into())).unwrap().reduce_mod(7),
            Err(Error::NotIntegral { p: 7 })
        ));
    }

    #[test]
    fn derivative_parts() {
        let one = QExp2::one(0, 3);
        let (x, y, z) = one.derivatives();
        assert!(x.is_zero() && y.is_zero() && z.is_zero());
        let f = QExp2::from_fn_q(4, 3, |t| q(1 + t.a * t.c + t.b * t.b));
        let (da, db, _) = f.derivatives();
        let t = HalfIntMat::new(1, 0, 1).unwrap();
        assert_eq!(da.coeff_q(&t), f.coeff_q(&t));
        assert!(f.check_parity());
        assert!(!db.clone().with_weight(4).check_parity());
        assert!(db.with_weight(5).check_parity());
    }

    fn arb_q(bound: usize) -> impl Strategy<Value = QExp2> {
        let n = KeyLayout::get(bound).len();
        proptest::collection::vec(-5i64..6, n)
            .prop_map(move |v| QExp2::from_fn_q(0, bound, |t| q(v[KeyLayout::get(bound).index(t).unwrap()])))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ring_laws(f in arb_q(3), g in arb_q(3), h in arb_q(2)) {
            let fg = f.mul(&g).unwrap();
            prop_assert_eq!(&fg, &g.mul(&f).unwrap());
            prop_assert_eq!(fg.mul(&h).unwrap(), f.mul(&g.mul(&h).unwrap()).unwrap());
            let lhs = f.mul(&g.add(&h).unwrap()).unwrap();
            let rhs = fg.truncate(2).unwrap().add(&f.mul(&h).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(QExp2::one(0, 3).mul(&f).unwrap(), f.clone());
            prop_assert_eq!(fg.phi(), f.phi().mul(&g.phi()).unwrap());
            if let (Some(a), Some(b), Some(c)) = (f.nu_p(5), g.nu_p(5), fg.nu_p(5)) {
                prop_assert!(c >= a + b);
            }
            for p in [5u64, 7] {
                let fp = f.reduce_mod(p).unwrap();
                let gp = g.reduce_mod(p).unwrap();
                prop_assert_eq!(fp.mul(&gp).unwrap(), fg.reduce_mod(p).unwrap());
                let lc = QExp2::linear_combine(&[(q(3), &f), (q(-2), &g)]).unwrap();
                let lcp = QExp2::linear_combine(&[(q(3), &fp), (q(-2), &gp)]).unwrap();
                prop_assert_eq!(lc.reduce_mod(p).unwrap(), lcp);
            }
        }
    }

    #[test]
    fn congruence_checks_window() {
        let f = QExp2::from_fn_q(12, 1, |t| q(t.a + t.b + 5 * t.c));
        let g = QExp2::from_fn_q(12, 1, |t| q(t.a + t.b));
        assert!(congruent_mod_p(&f, &f, 7).unwrap());
        assert!(!congruent_mod_p(&f, &g, 7).unwrap());
        assert!(matches!(
            congruent_mod_p(&f.clone().with_weight(20), &g.with_weight(20), 7),
            Err(Error::BoundTooSmall { .. })
        ));
        assert!(QExp2::linear_combine(&[(q(1), &f), (q(1), &f.clone().with_weight(10))]).is_err());
    }

    #[test]
    fn equal_valuation_on_monomials() {
        // nu_p(FG) = nu_p(F) + nu_p(G) when F and G are single terms.
        let t1 = HalfIntMat::new(1, 0, 1).unwrap();
        let f = QExp2::from_fn_q(0, 3, |t| if *t == t1 { q(50) } else { q(0) });
        let g = QExp2::from_fn_q(0, 3, |t| if *t == t1 { BigRational::new(3.into(), 5.into()) } else { q(0) });
        assert_eq!(f.mul(&g).unwrap().nu_p(5), Some(1));
    }
}
