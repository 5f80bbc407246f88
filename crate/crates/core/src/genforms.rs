//! Generators of the ring of degree-2 modular forms as exact expansions.

use crate::error::{Error, Result};
use crate::halfint::HalfIntMat;
use crate::linalg::rational_nullspace;
use crate::nt;
use crate::qexp::{KeyLayout, QExp1, QExp2};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock, Mutex, OnceLock};

/// Largest bound accepted by the E8 enumeration.
pub const THETA_E8_MAX_BOUND: usize = 4;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

static BERNOULLI: LazyLock<Mutex<Vec<BigRational>>> = LazyLock::new(|| Mutex::new(vec![q(1)]));

/// Bernoulli number B_n with B_1 = −1/2.
pub fn bernoulli(n: u32) -> BigRational {
    let mut cache = BERNOULLI.lock().unwrap();
    while cache.len() <= n as usize {
        let m = cache.len() as u32;
        // Σ_{k<m} C(m+1, k) B_k + (m+1) B_m = 0.
        let s: BigRational = (0..m).map(|k| BigRational::from_integer(binomial(m + 1, k)) * &cache[k as usize]).sum();
        cache.push(-s / q(m as i64 + 1));
    }
    cache[n as usize].clone()
}

/// ζ(1 − k) = −B_k / k for k ≥ 2.
pub fn zeta_one_minus(k: u32) -> BigRational {
    -bernoulli(k) / q(k as i64)
}

static GEN_BERNOULLI: LazyLock<Mutex<HashMap<(u32, i64), BigRational>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

/// Generalized Bernoulli number B_{n, χ_D} for a fundamental discriminant D.
pub fn gen_bernoulli(n: u32, d: i64) -> Result<BigRational> {
    if n < 1 {
        return Err(Error::InvalidArgument("gen_bernoulli needs n ≥ 1".into()));
    }
    if !nt::is_fundamental_discriminant(d) {
        return Err(Error::InvalidArgument(format!("{d} is not a fundamental discriminant")));
    }
    if let Some(v) = GEN_BERNOULLI.lock().unwrap().get(&(n, d)) {
        return Ok(v.clone());
    }
    // f^{n−1} Σ_a χ(a) B_n(a/f) = Σ_j C(n,j) B_j f^{j−1} Σ_a χ(a) a^{n−j}.
    let f = d.unsigned_abs();
    let mut power_sums = vec![BigInt::zero(); n as usize + 1];
    for a in 1..=f {
        let chi = nt::kronecker(d, a);
        if chi == 0 {
            continue;
        }
        let mut pw = BigInt::from(chi);
        for s in power_sums.iter_mut() {
            *s += &pw;
            pw *= a;
        }
    }
    let fq = q(f as i64);
    let mut total = BigRational::zero();
    for j in 0..=n {
        let term = BigRational::from_integer(binomial(n, j) * &power_sums[(n - j) as usize])
            * bernoulli(j)
            * num_traits::pow(fq.clone(), j as usize)
            / &fq;
        total += term;
    }
    GEN_BERNOULLI.lock().unwrap().insert((n, d), total.clone());
    Ok(total)
}

/// Cohen's function H(r, N).
pub fn cohen_h(r: u32, n: i64) -> Result<BigRational> {
    if r < 1 || n < 0 {
        return Err(Error::InvalidArgument(format!("H({r}, {n})")));
    }
    if n == 0 {
        return Ok(zeta_one_minus(2 * r));
    }
    let m = if r % 2 == 1 { -n } else { n };
    let Some((d, f)) = nt::fundamental_part(m) else {
        return Ok(BigRational::zero());
    };
    let l_value = -gen_bernoulli(r, d)? / q(r as i64);
    let mut s = BigInt::zero();
    for e in nt::divisors(f) {
        let mu = nt::moebius(e);
        let chi = nt::kronecker(d, e);
        if mu == 0 || chi == 0 {
            continue;
        }
        s += BigInt::from(mu * chi) * nt::big_pow(e as i64, r - 1) * nt::sigma(2 * r - 1, f / e);
    }
    Ok(l_value * BigRational::from_integer(s))
}

fn check_weight(k: u32) -> Result<()> {
    if k < 4 || k % 2 == 1 {
        return Err(Error::InvalidArgument(format!("Eisenstein weight {k} must be even and ≥ 4")));
    }
    Ok(())
}

/// Degree-1 Eisenstein series 1 − (2k/B_k) Σ σ_{k−1}(n) qⁿ.
pub fn eisenstein1(k: u32, bound: usize) -> Result<QExp1> {
    check_weight(k)?;
    let c = q(-2 * k as i64) / bernoulli(k);
    let v = (0..=bound as u64)
        .map(|n| if n == 0 { q(1) } else { &c * BigRational::from_integer(nt::sigma(k - 1, n)) })
        .collect();
    Ok(QExp1::from_rationals(k as i64, v))
}

/// Degree-2 Siegel–Eisenstein series of even weight k ≥ 4, normalized by a(0) = 1.
pub fn siegel_eisenstein(k: u32, bound: usize) -> Result<QExp2> {
    check_weight(k)?;
    let c1 = q(2) / zeta_one_minus(k);
    let c2 = q(2) / (zeta_one_minus(k) * zeta_one_minus(2 * k - 2));
    let mut memo: HashMap<(i64, i64), BigRational> = HashMap::new();
    let layout = KeyLayout::get(bound);
    for t in layout.keys() {
        let e = t.content();
        let disc = t.discriminant();
        if t.rank() < 2 || memo.contains_key(&(e, disc)) {
            continue;
        }
        let mut s = BigRational::zero();
        for d in nt::divisors(e as u64) {
            let d = d as i64;
            s += q(1) * nt::big_pow(d, k - 1) * cohen_h(k - 1, disc / (d * d))?;
        }
        memo.insert((e, disc), &c2 * s);
    }
    Ok(QExp2::from_fn_q(k as i64, bound, |t| match t.rank() {
        0 => q(1),
        1 => &c1 * BigRational::from_integer(nt::sigma(k - 1, t.content() as u64)),
        _ => memo[&(t.content(), t.discriminant())].clone(),
    }))
}

/// Vectors of the E8 lattice in doubled coordinates with norm x·x ≤ 2·bound,
/// grouped by x·x / 2.
fn e8_vectors(bound: usize) -> Vec<Vec<[i8; 8]>> {
    let max_sq = 8 * bound as i32; // Σ X² with X = 2x
    let r = (max_sq as f64).sqrt() as i32;
    let mut out = vec![Vec::new(); bound + 1];
    let mut cur = [0i8; 8];
    fn rec(
        i: usize,
        sq: i32,
        sum: i32,
        parity: i32,
        r: i32,
        max_sq: i32,
        cur: &mut [i8; 8],
        out: &mut Vec<Vec<[i8; 8]>>,
    ) {
        if i == 8 {
            if sum.rem_euclid(4) == 0 {
                out[(sq / 8) as usize].push(*cur);
            }
            return;
        }
        let mut x = -r;
        while x <= r {
            if x.rem_euclid(2) == parity && sq + x * x <= max_sq {
                cur[i] = x as i8;
                rec(i + 1, sq + x * x, sum + x, parity, r, max_sq, cur, out);
            }
            x += 1;
        }
    }
    for parity in 0..2 {
        rec(0, 0, 0, parity, r, max_sq, &mut cur, &mut out);
    }
    out
}

/// Genus-2 theta series of the E8 lattice: a(T) counts pairs (x, y) with Gram
/// matrix ½[[x·x, x·y], [x·y, y·y]] = T.
pub fn theta_e8(bound: usize) -> Result<QExp2> {
    if bound > THETA_E8_MAX_BOUND {
        return Err(Error::InvalidArgument(format!(
            "theta_e8 enumerates at most bound {THETA_E8_MAX_BOUND}, got {bound}"
        )));
    }
    let vecs = e8_vectors(bound);
    let layout = KeyLayout::get(bound);
    let mut counts = vec![0u64; layout.len()];
    for a in 0..=bound {
        for c in a..=bound {
            for x in &vecs[a] {
                for y in &vecs[c] {
                    let dot: i32 = (0..8).map(|i| x[i] as i32 * y[i] as i32).sum();
                    // x·y = dot / 4 and b = x·y.
                    let t = HalfIntMat::new_unchecked(a as i64, (dot / 4) as i64, c as i64);
                    counts[layout.index(&t).unwrap()] += 1;
                }
            }
        }
    }
    Ok(QExp2::from_fn_q(4, bound, |t| {
        let t = if t.a <= t.c { *t } else { HalfIntMat::new_unchecked(t.c, t.b, t.a) };
        q(counts[layout.index(&t).unwrap()] as i64)
    }))
}

fn normalize_at(f: QExp2, t: &HalfIntMat) -> Result<QExp2> {
    let c = f.coeff_q(t);
    if c.is_zero() {
        return Err(Error::Degenerate(format!("coefficient at {t} vanishes")));
    }
    f.scale(&(q(1) / c))
}

const T111: HalfIntMat = HalfIntMat::new_unchecked(1, 1, 1);

/// X10 = E4·E6 − E10, scaled to a(1,1,1) = 1.
pub fn igusa_x10_from(e4: &QExp2, e6: &QExp2, e10: &QExp2) -> Result<QExp2> {
    if e10.bound() < 1 {
        return Err(Error::BoundTooSmall { have: e10.bound(), need: 1 });
    }
    normalize_at(e4.mul(e6)?.sub(e10)?, &T111)
}

/// The cusp form in span{E4³, E6², E12}, scaled to a(1,1,1) = 1.
pub fn igusa_x12_from(e4: &QExp2, e6: &QExp2, e12: &QExp2) -> Result<QExp2> {
    let parts = [e4.pow(3)?, e6.pow(2)?, e12.clone()];
    let bound = parts.iter().map(|f| f.bound()).min().unwrap();
    if bound < 2 {
        return Err(Error::BoundTooSmall { have: bound, need: 2 });
    }
    let phis: Vec<QExp1> = parts.iter().map(|f| f.phi()).collect();
    let rows: Vec<Vec<BigRational>> =
        (0..=bound).map(|n| phis.iter().map(|f| f.values_q()[n].clone()).collect()).collect();
    let ker = rational_nullspace(&rows, 3);
    if ker.len() != 1 {
        return Err(Error::Degenerate(format!("cusp kernel in weight 12 has dimension {}", ker.len())));
    }
    let terms: Vec<(BigRational, &QExp2)> = ker[0].iter().cloned().zip(parts.iter()).collect();
    normalize_at(QExp2::linear_combine(&terms)?, &T111)
}

/// Jacobian determinant of (E4, E6, X10, X12), scaled so the first nonzero
/// coefficient in (a, c, b) order is 1. Weight 35.
pub fn igusa_x35_from(e4: &QExp2, e6: &QExp2, x10: &QExp2, x12: &QExp2) -> Result<QExp2> {
    let gens = [e4, e6, x10, x12];
    let top: Vec<QExp2> = gens.iter().map(|g| g.scale(&q(g.weight()))).collect::<Result<_>>()?;
    let ders: Vec<(QExp2, QExp2, QExp2)> = gens.iter().map(|g| g.derivatives()).collect();
    let one = q(1);
    let minus = q(-1);
    // 2×2 minors of the ∂z and ∂τ′ rows.
    let mut m2: HashMap<(usize, usize), QExp2> = HashMap::new();
    for j in 0..4 {
        for l in j + 1..4 {
            let x = ders[j].1.mul(&ders[l].2)?;
            let y = ders[l].1.mul(&ders[j].2)?;
            m2.insert((j, l), QExp2::linear_combine(&[(one.clone(), &x), (minus.clone(), &y)])?);
        }
    }
    let mut det: Option<QExp2> = None;
    for i in 0..4 {
        let cols: Vec<usize> = (0..4).filter(|&c| c != i).collect();
        let (j, l, m) = (cols[0], cols[1], cols[2]);
        let t1 = ders[j].0.mul(&m2[&(l, m)])?;
        let t2 = ders[l].0.mul(&m2[&(j, m)])?;
        let t3 = ders[m].0.mul(&m2[&(j, l)])?;
        let m3 = QExp2::linear_combine(&[(one.clone(), &t1), (minus.clone(), &t2), (one.clone(), &t3)])?;
        let term = top[i].mul(&m3)?;
        let sign = if i % 2 == 0 { one.clone() } else { minus.clone() };
        det = Some(match det {
            None => term.scale(&sign)?,
            Some(d) => QExp2::linear_combine(&[(one.clone(), &d), (sign, &term)])?,
        });
    }
    let det = det.unwrap();
    let Some(first) = det.values_q().iter().find(|x| !x.is_zero()).cloned() else {
        return Err(Error::Degenerate(format!("Jacobian vanishes to bound {}", det.bound())));
    };
    debug_assert_eq!(det.weight(), 35);
    det.scale(&(q(1) / first))
}

pub fn igusa_x10(bound: usize) -> Result<QExp2> {
    igusa_x10_from(&siegel_eisenstein(4, bound)?, &siegel_eisenstein(6, bound)?, &siegel_eisenstein(10, bound)?)
}

pub fn igusa_x12(bound: usize) -> Result<QExp2> {
    igusa_x12_from(&siegel_eisenstein(4, bound)?, &siegel_eisenstein(6, bound)?, &siegel_eisenstein(12, bound)?)
}

pub fn igusa_x35(bound: usize) -> Result<QExp2> {
    GeneratorCache::new(bound).get(Gen::X35).map(|f| (*f).clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gen {
    E4,
    E6,
    E10,
    E12,
    X10,
    X12,
    X35,
}

impl Gen {
    pub const ALL: [Gen; 7] = [Gen::E4, Gen::E6, Gen::E10, Gen::E12, Gen::X10, Gen::X12, Gen::X35];

    pub fn name(self) -> &'static str {
        match self {
            Gen::E4 => "E4",
            Gen::E6 => "E6",
            Gen::E10 => "E10",
            Gen::E12 => "E12",
            Gen::X10 => "X10",
            Gen::X12 => "X12",
            Gen::X35 => "X35",
        }
    }

    pub fn weight(self) -> i64 {
        match self {
            Gen::E4 => 4,
            Gen::E6 => 6,
            Gen::E10 | Gen::X10 => 10,
            Gen::E12 | Gen::X12 => 12,
            Gen::X35 => 35,
        }
    }

    pub fn parse(s: &str) -> Option<Gen> {
        Gen::ALL.into_iter().find(|g| g.name().eq_ignore_ascii_case(s))
    }

    fn index(self) -> usize {
        Gen::ALL.iter().position(|&g| g == self).unwrap()
    }
}

/// Characteristic-0 generator expansions at a fixed bound, optionally backed by
/// a directory of serialized files.
pub struct GeneratorCache {
    bound: usize,
    dir: Option<PathBuf>,
    slots: [OnceLock<Arc<QExp2>>; 7],
}

impl GeneratorCache {
    pub fn new(bound: usize) -> Self {
        GeneratorCache { bound, dir: None, slots: Default::default() }
    }

    pub fn with_dir(bound: usize, dir: impl AsRef<Path>) -> Self {
        GeneratorCache { bound, dir: Some(dir.as_ref().to_path_buf()), slots: Default::default() }
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn file_path(&self, g: Gen) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}-B{}.qexp", g.name(), self.bound)))
    }

    pub fn get(&self, g: Gen) -> Result<Arc<QExp2>> {
        if let Some(f) = self.slots[g.index()].get() {
            return Ok(f.clone());
        }
        let f = match self.load(g)? {
            Some(f) => f,
            None => {
                let f = self.compute(g)?;
                self.store(g, &f)?;
                f
            }
        };
        let _ = self.slots[g.index()].set(Arc::new(f));
        Ok(self.slots[g.index()].get().unwrap().clone())
    }

    fn compute(&self, g: Gen) -> Result<QExp2> {
        let b = self.bound;
        match g {
            Gen::E4 => siegel_eisenstein(4, b),
            Gen::E6 => siegel_eisenstein(6, b),
            Gen::E10 => siegel_eisenstein(10, b),
            Gen::E12 => siegel_eisenstein(12, b),
            Gen::X10 => igusa_x10_from(&*self.get(Gen::E4)?, &*self.get(Gen::E6)?, &*self.get(Gen::E10)?),
            Gen::X12 => igusa_x12_from(&*self.get(Gen::E4)?, &*self.get(Gen::E6)?, &*self.get(Gen::E12)?),
            Gen::X35 => {
                igusa_x35_from(&*self.get(Gen::E4)?, &*self.get(Gen::E6)?, &*self.get(Gen::X10)?, &*self.get(Gen::X12)?)
            }
        }
    }

    fn load(&self, g: Gen) -> Result<Option<QExp2>> {
        let Some(path) = self.file_path(g) else {
            return Ok(None);
        };
        let Ok(text) = std::fs::read_to_string(&path) else {
            return Ok(None);
        };
        let f = QExp2::parse(&text)?;
        if f.weight() != g.weight() || f.bound() != self.bound || f.characteristic() != 0 {
            return Err(Error::InvalidArgument(format!(
                "cache file {} has weight {} bound {} char {}",
                path.display(),
                f.weight(),
                f.bound(),
                f.characteristic()
            )));
        }
        Ok(Some(f))
    }

    fn store(&self, g: Gen, f: &QExp2) -> Result<()> {
        let Some(path) = self.file_path(g) else {
            return Ok(());
        };
        let dir = path.parent().unwrap();
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}-B{}.{}.tmp", g.name(), self.bound, std::process::id()));
        std::fs::write(&tmp, f.serialize())?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// Largest absolute numerator, for quick size diagnostics.
pub fn max_numerator_bits(f: &QExp2) -> u64 {
    f.values_q().iter().map(|x| x.numer().abs().bits()).max().unwrap_or(0)
}
