//! Table drivers: filtrations of A(p)-images, kernels of Θ, the conjecture
//! audit, and the verification suite.

use crate::error::{Error, Result};
use crate::genforms::{eisenstein1, siegel_eisenstein, theta_e8, Gen, GeneratorCache};
use crate::halfint::{reduced_keys, HalfIntMat};
use crate::nt::primes_in;
use crate::qexp::{congruent_mod_p, QExp2};
use crate::ringmodp::{dim, monomials, sturm_bound, Exps, IsobaricPoly, ModpRing, ThetaKernel};
use crate::thetaops::{classify_kernel_type, theta, theta1, KernelType};
use num_traits::One;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format {s}"))),
        }
    }
}

fn ser_ord<S: Serializer>(ord: &Option<u32>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match ord {
        Some(e) => s.serialize_u32(*e),
        None => s.serialize_str("inf"),
    }
}

fn ord_text(ord: Option<u32>) -> String {
    ord.map_or("inf".into(), |e| e.to_string())
}

/// α_{k,p}(F) = (ord_H(F|A(p)), l, l mod p, 2l − 1 mod p) with its multiplicity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlphaRecord {
    #[serde(serialize_with = "ser_ord")]
    pub ord: Option<u32>,
    pub l: i64,
    pub l_mod_p: i64,
    pub two_l_minus_1_mod_p: i64,
    pub multiplicity: usize,
    pub bold: bool,
}

impl AlphaRecord {
    pub fn new(ord: Option<u32>, l: i64, p: u64, multiplicity: usize) -> Self {
        let p = p as i64;
        let (lm, tm) = (l.rem_euclid(p), (2 * l - 1).rem_euclid(p));
        AlphaRecord { ord, l, l_mod_p: lm, two_l_minus_1_mod_p: tm, multiplicity, bold: lm != 0 && tm != 0 }
    }
}

impl fmt::Display for AlphaRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[({},{},{},{}),{}]",
            if self.bold { "*" } else { "" },
            ord_text(self.ord),
            self.l,
            self.l_mod_p,
            self.two_l_minus_1_mod_p,
            self.multiplicity
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AopRow {
    pub p: u64,
    pub k: i64,
    pub records: Vec<AlphaRecord>,
}

impl fmt::Display for AopRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k)?;
        for r in &self.records {
            write!(f, " {r}")?;
        }
        Ok(())
    }
}

/// Bound on generator expansions needed by `table_aop`.
pub fn aop_bound(p: u64, kmax: i64) -> usize {
    sturm_bound(kmax + (p * p) as i64 - 1)
}

/// ψ^{-1} of the A(p)-images of the given weight-k monomials, at weight k + p² − 1.
pub fn aop_images(ring: &ModpRing, k: i64, basis: &[Exps]) -> Result<Vec<IsobaricPoly>> {
    let p = ring.p();
    let big_k = k + (p * p) as i64 - 1;
    let b = sturm_bound(big_k);
    let keep: Vec<bool> = reduced_keys(b).iter().map(|t| t.discriminant() % p as i64 == 0).collect();
    basis
        .iter()
        .map(|e| {
            let mut v = (*ring.monomial_at_reduced(e, false, b)?).clone();
            for (x, &k) in v.iter_mut().zip(&keep) {
                if !k {
                    *x = 0;
                }
            }
            ring.psi_inv_values(&v, big_k)
        })
        .collect()
}

/// α-records of the A(p)-images of a basis of weight k, aggregated with multiplicity.
pub fn aop_records(ring: &ModpRing, k: i64, basis: &[Exps]) -> Result<Vec<AlphaRecord>> {
    let p = ring.p();
    let big_k = k + (p * p) as i64 - 1;
    let images = aop_images(ring, k, basis)?;
    let ech = ring.echelon_basis(&images)?;
    let mut counts: BTreeMap<(Option<u32>, i64), usize> = BTreeMap::new();
    for ord in ech.ords {
        let l = ord.map_or(0, |e| big_k - (p as i64 - 1) * e as i64);
        *counts.entry((ord, l)).or_default() += 1;
    }
    let mut out: Vec<AlphaRecord> = counts.into_iter().map(|((ord, l), m)| AlphaRecord::new(ord, l, p, m)).collect();
    out.sort_by_key(|r| (r.ord.is_none(), r.ord, r.l));
    Ok(out)
}

/// Filtrations of A(p)-images of M_k for even 4 ≤ k ≤ kmax.
pub fn table_aop(cache: &GeneratorCache, p: u64, kmax: i64) -> Result<Vec<AopRow>> {
    let bound = aop_bound(p, kmax);
    let ring = ModpRing::new(cache, p, bound)?;
    (4..=kmax)
        .step_by(2)
        .filter(|&k| dim(k) > 0)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let (_, basis) = monomials(k, ring.order());
            Ok(AopRow { p, k, records: aop_records(&ring, k, &basis)? })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelCell {
    pub p: u64,
    pub k: i64,
    pub dim: usize,
    /// Some kernel element has filtration exactly k.
    pub appears: bool,
    /// b_{k+p+1} exceeded the cap; nothing was computed.
    pub skipped: bool,
    /// For appearing weights: k ≢ 0 and 2k − 1 ≢ 0 mod p.
    pub violation: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelTable {
    pub kmax: i64,
    pub cap: usize,
    pub cells: Vec<KernelCell>,
    pub violations: Vec<(u64, i64)>,
}

impl KernelTable {
    /// Appearing weights per prime.
    pub fn rows(&self) -> BTreeMap<u64, Vec<i64>> {
        let mut out: BTreeMap<u64, Vec<i64>> = BTreeMap::new();
        for c in &self.cells {
            let row = out.entry(c.p).or_default();
            if c.appears {
                row.push(c.k);
            }
        }
        out
    }
}

/// Ring bound used for prime p in the kernel table.
pub fn kernel_bound(p: u64, kmax: i64, cap: usize) -> usize {
    (0..=kmax).map(|k| sturm_bound(k + p as i64 + 1)).filter(|&b| b <= cap).max().unwrap_or(0)
}

fn kernel_cells(
    cache: &GeneratorCache,
    p: u64,
    kmax: i64,
    cap: usize,
) -> Result<(ModpRing, Vec<KernelCell>, Vec<ThetaKernel>)> {
    let ring = ModpRing::new(cache, p, kernel_bound(p, kmax, cap))?;
    let results: Vec<Result<(KernelCell, Option<ThetaKernel>)>> = (0..=kmax)
        .into_par_iter()
        .map(|k| {
            if sturm_bound(k + p as i64 + 1) > cap {
                let cell = KernelCell { p, k, dim: 0, appears: false, skipped: true, violation: None };
                return Ok((cell, None));
            }
            let ker = ring.kernel_theta(k)?;
            let pi = p as i64;
            let violation = ker.appears.then(|| k % pi != 0 && (2 * k - 1).rem_euclid(pi) != 0);
            let cell = KernelCell { p, k, dim: ker.dim, appears: ker.appears, skipped: false, violation };
            Ok((cell, Some(ker)))
        })
        .collect();
    let mut cells = Vec::new();
    let mut kernels = Vec::new();
    for r in results {
        let (c, k) = r?;
        cells.push(c);
        kernels.extend(k);
    }
    Ok((ring, cells, kernels))
}

/// Kernels of Θ mod p for the given primes and 0 ≤ k ≤ kmax (both parities) with b_{k+p+1} ≤ cap.
pub fn table_theta_kernel(cache: &GeneratorCache, primes: &[u64], kmax: i64, cap: usize) -> Result<KernelTable> {
    let per_p: Vec<Result<Vec<KernelCell>>> =
        primes.par_iter().map(|&p| kernel_cells(cache, p, kmax, cap).map(|r| r.1)).collect();
    let mut cells = Vec::new();
    for r in per_p {
        cells.extend(r?);
    }
    cells.sort_by_key(|c| (c.p, c.k));
    let violations = cells.iter().filter(|c| c.violation == Some(true)).map(|c| (c.p, c.k)).collect();
    Ok(KernelTable { kmax, cap, cells, violations })
}

/// Primes 5 ≤ p ≤ pmax.
pub fn table_primes(pmax: u64) -> Vec<u64> {
    primes_in(5, pmax)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Holds,
    Violates,
    /// Type (a) with nonzero filtration: the conjecture makes no claim.
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditEntry {
    pub p: u64,
    pub k: i64,
    pub omega: i64,
    pub kernel_type: KernelType,
    pub status: AuditStatus,
    pub element: String,
}

/// Checks the predicted divisibility for one classified kernel element.
pub fn audit_status(p: u64, omega: i64, t: KernelType) -> AuditStatus {
    let pi = p as i64;
    if omega == 0 {
        return AuditStatus::Holds;
    }
    let ok = match t {
        KernelType::A => return AuditStatus::NotApplicable,
        KernelType::B => omega % pi == 0,
        KernelType::C => (2 * omega - 1).rem_euclid(pi) == 0,
    };
    if ok {
        AuditStatus::Holds
    } else {
        AuditStatus::Violates
    }
}

/// Classifies every echelonized kernel element with filtration equal to its
/// weight and checks the conjectured divisibility.
pub fn audit_conjecture(cache: &GeneratorCache, primes: &[u64], kmax: i64, cap: usize) -> Result<Vec<AuditEntry>> {
    let per_p: Vec<Result<Vec<AuditEntry>>> = primes
        .par_iter()
        .map(|&p| {
            let (ring, _, kernels) = kernel_cells(cache, p, kmax, cap)?;
            let mut out = Vec::new();
            for ker in kernels {
                for (f, omega) in ker.elements.iter().zip(ker.filtrations()) {
                    if omega != ker.k {
                        continue;
                    }
                    let form = ring.psi(f, ring.bound())?;
                    let t = classify_kernel_type(&form, p)?;
                    out.push(AuditEntry {
                        p,
                        k: ker.k,
                        omega,
                        kernel_type: t,
                        status: audit_status(p, omega, t),
                        element: f.to_string(),
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_p {
        out.extend(r?);
    }
    out.sort_by_key(|e| (e.p, e.k));
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, r: Result<bool>) -> Check {
    match r {
        Ok(passed) => Check { name: name.into(), passed, detail: String::new() },
        Err(e) => Check { name: name.into(), passed: false, detail: e.to_string() },
    }
}

fn vanishes_on_singular(f: &QExp2) -> bool {
    f.keys().iter().zip(f.values_q()).all(|(t, x)| t.rank() == 2 || x == &num_traits::Zero::zero())
}

/// Generator gates, mod-p constants, the h-solve for all table primes, and
/// the filtration congruence on small table outputs.
pub fn verify(cache: &GeneratorCache) -> Vec<Check> {
    let one_one = HalfIntMat::new_unchecked(1, 1, 1);
    let mut out = vec![
        check("E4 = E8-theta", (|| Ok(siegel_eisenstein(4, 4)?.values_q() == theta_e8(4)?.values_q()))()),
        check(
            "Phi(E_k) = degree-1 Eisenstein",
            (|| {
                for k in [4u32, 6, 10, 12] {
                    let b = cache.bound().min(6);
                    if siegel_eisenstein(k, b)?.phi().values_q() != eisenstein1(k, b)?.values_q() {
                        return Ok(false);
                    }
                }
                Ok(true)
            })(),
        ),
        check(
            "cusp generators vanish on singular keys",
            Ok([Gen::X10, Gen::X12, Gen::X35]
                .iter()
                .all(|&g| cache.get(g).map(|f| vanishes_on_singular(&f)).unwrap_or(false))),
        ),
        check(
            "X10, X12 normalized at (1,1,1)",
            (|| Ok(cache.get(Gen::X10)?.coeff_q(&one_one).is_one() && cache.get(Gen::X12)?.coeff_q(&one_one).is_one()))(
            ),
        ),
        check(
            "E4 = 1 mod 5",
            (|| congruent_mod_p(&*cache.get(Gen::E4)?, &QExp2::constant(0, 0, cache.bound(), 1), 5))(),
        ),
        check(
            "E6 = 1 mod 7",
            (|| congruent_mod_p(&*cache.get(Gen::E6)?, &QExp2::constant(0, 0, cache.bound(), 1), 7))(),
        ),
        check(
            "Theta(E4) = 0 and Theta1(E4) != 0 mod 7",
            (|| {
                let e4 = cache.get(Gen::E4)?.reduce_mod(7)?;
                Ok(theta(&e4)?.is_zero() && !theta1(&e4)?.is_zero())
            })(),
        ),
    ];
    let h_solve: Result<bool> = table_primes(79)
        .par_iter()
        .map(|&p| {
            let ring = ModpRing::new(cache, p, sturm_bound(p as i64 - 1).max(1).min(cache.bound()))?;
            let h = ring.h_poly()?;
            Ok(ring.psi(&h, ring.bound())?.values_p() == QExp2::constant(0, p, ring.bound(), 1).values_p())
        })
        .collect::<Result<Vec<bool>>>()
        .map(|v| v.into_iter().all(|x| x));
    out.push(check("E_{p-1} h-solve unique for p <= 79", h_solve));
    let congruence = (|| {
        for p in [5u64, 7] {
            let kmax = if cache.bound() >= aop_bound(p, 20) { 20 } else { 4 };
            for row in table_aop(cache, p, kmax)? {
                for r in &row.records {
                    let big_k = row.k + (p * p) as i64 - 1;
                    if r.l > 0 && (big_k - r.l) % (p as i64 - 1) != 0 {
                        return Ok(false);
                    }
                    if r.l > big_k {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    })();
    out.push(check("omega = k mod p-1 on table outputs", congruence));
    out
}

#[derive(Serialize)]
struct AopCsv {
    p: u64,
    k: i64,
    #[serde(serialize_with = "ser_ord")]
    ord: Option<u32>,
    l: i64,
    l_mod_p: i64,
    two_l_minus_1_mod_p: i64,
    multiplicity: usize,
    bold: bool,
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string()))
}

pub fn render_aop(rows: &[AopRow], fmt: Format) -> Result<String> {
    match fmt {
        Format::Text => Ok(rows.iter().map(|r| format!("{r}\n")).collect()),
        Format::Json => json_string(rows),
        Format::Csv => csv_string(rows.iter().flat_map(|row| {
            row.records.iter().map(|r| AopCsv {
                p: row.p,
                k: row.k,
                ord: r.ord,
                l: r.l,
                l_mod_p: r.l_mod_p,
                two_l_minus_1_mod_p: r.two_l_minus_1_mod_p,
                multiplicity: r.multiplicity,
                bold: r.bold,
            })
        })),
    }
}

pub fn render_kernel(table: &KernelTable, fmt: Format) -> Result<String> {
    match fmt {
        Format::Text => {
            let mut s = String::new();
            for (p, ks) in table.rows() {
                let ks: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                s += &format!("{p} {}\n", ks.join(" "));
            }
            let v: Vec<String> = table.violations.iter().map(|(p, k)| format!("({p},{k})")).collect();
            s += &format!("violations {}\n", v.join(" "));
            Ok(s)
        }
        Format::Json => json_string(table),
        Format::Csv => csv_string(&table.cells),
    }
}

pub fn render_audit(entries: &[AuditEntry], fmt: Format) -> Result<String> {
    match fmt {
        Format::Text => Ok(entries
            .iter()
            .map(|e| {
                let status =
                    serde_json::to_value(e.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                format!("p={} k={} omega={} type={} {} {}\n", e.p, e.k, e.omega, e.kernel_type, status, e.element)
            })
            .collect()),
        Format::Json => json_string(entries),
        Format::Csv => csv_string(entries),
    }
}

pub fn render_checks(checks: &[Check], fmt: Format) -> Result<String> {
    match fmt {
        Format::Text => Ok(checks
            .iter()
            .map(|c| {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    format!("{tag} {}\n", c.name)
                } else {
                    format!("{tag} {} ({})\n", c.name, c.detail)
                }
            })
            .collect()),
        Format::Json => json_string(checks),
        Format::Csv => csv_string(checks),
    }
}
