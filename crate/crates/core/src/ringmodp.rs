//! The ring F_p[x4, x6, x10, x12] (odd weights through a formal factor x35),
//! its identification with mod-p modular forms, and filtrations.

use crate::error::{Error, Result};
use crate::genforms::{Gen, GeneratorCache};
use crate::halfint::{reduced_keys, HalfIntMat};
use crate::linalg::Mat;
use crate::modp;
use crate::qexp::QExp2;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// Exponents of (x4, x6, x10, x12).
pub type Exps = [u32; 4];

pub const GEN_WEIGHTS: [i64; 4] = [4, 6, 10, 12];

pub fn exps_weight(e: &Exps) -> i64 {
    e.iter().zip(GEN_WEIGHTS).map(|(&x, w)| x as i64 * w).sum()
}

/// b_k: reduced keys with max(a, c) ≤ b_k determine a weight-k form mod p.
pub fn sturm_bound(k: i64) -> usize {
    if k < 0 {
        return 0;
    }
    if k % 2 == 0 {
        (k / 10) as usize
    } else {
        ((k - 5).max(0) / 10) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Hash)]
pub enum MonomialOrder {
    /// Graded reverse lexicographic, x4 > x6 > x10 > x12, graded by total degree.
    #[default]
    GrevLex,
    /// Lexicographic, x4 > x6 > x10 > x12.
    Lex,
}

impl MonomialOrder {
    pub fn cmp(&self, a: &Exps, b: &Exps) -> Ordering {
        match self {
            MonomialOrder::Lex => a.cmp(b),
            MonomialOrder::GrevLex => {
                let da: u32 = a.iter().sum();
                let db: u32 = b.iter().sum();
                da.cmp(&db).then_with(|| {
                    for i in (0..4).rev() {
                        if a[i] != b[i] {
                            return b[i].cmp(&a[i]);
                        }
                    }
                    Ordering::Equal
                })
            }
        }
    }
}

/// Monomials of weight w in x4, x6, x10, x12, largest first.
pub fn even_monomials(w: i64, order: MonomialOrder) -> Vec<Exps> {
    let mut out = Vec::new();
    if w < 0 || w % 2 == 1 {
        return out;
    }
    for d in 0..=w / 12 {
        for c in 0..=(w - 12 * d) / 10 {
            let r = w - 12 * d - 10 * c;
            for b in 0..=r / 6 {
                let rest = r - 6 * b;
                if rest % 4 == 0 {
                    out.push([(rest / 4) as u32, b as u32, c as u32, d as u32]);
                }
            }
        }
    }
    out.sort_by(|x, y| order.cmp(y, x));
    out
}

/// Monomial basis of weight k: even monomials for even k, x35 times the
/// monomials of weight k − 35 for odd k. Returns (x35 flag, exponents).
pub fn monomials(k: i64, order: MonomialOrder) -> (bool, Vec<Exps>) {
    if k.rem_euclid(2) == 1 {
        (true, even_monomials(k - 35, order))
    } else {
        (false, even_monomials(k, order))
    }
}

pub fn dim(k: i64) -> usize {
    monomials(k, MonomialOrder::GrevLex).1.len()
}

fn divides(a: &Exps, b: &Exps) -> bool {
    (0..4).all(|i| a[i] <= b[i])
}

/// Isobaric polynomial over F_p, optionally carrying one factor x35.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsobaricPoly {
    p: u64,
    weight: i64,
    x35: bool,
    terms: BTreeMap<Exps, u64>,
}

impl IsobaricPoly {
    pub fn zero(p: u64, weight: i64, x35: bool) -> Self {
        IsobaricPoly { p, weight, x35, terms: BTreeMap::new() }
    }

    pub fn monomial(p: u64, e: Exps, x35: bool, c: u64) -> Self {
        let mut f = Self::zero(p, exps_weight(&e) + if x35 { 35 } else { 0 }, x35);
        f.add_term(e, c);
        f
    }

    pub fn one(p: u64) -> Self {
        Self::monomial(p, [0; 4], false, 1)
    }

    pub fn from_terms(p: u64, weight: i64, x35: bool, terms: impl IntoIterator<Item = (Exps, u64)>) -> Result<Self> {
        let mut f = Self::zero(p, weight, x35);
        for (e, c) in terms {
            if exps_weight(&e) + if x35 { 35 } else { 0 } != weight {
                return Err(Error::WeightMismatch(weight, exps_weight(&e)));
            }
            f.add_term(e, c);
        }
        Ok(f)
    }

    /// Coordinates with respect to a monomial list (all monomials of the
    /// polynomial must occur in it).
    pub fn from_coords(p: u64, weight: i64, x35: bool, basis: &[Exps], v: &[u64]) -> Self {
        let mut f = Self::zero(p, weight, x35);
        for (e, &c) in basis.iter().zip(v) {
            f.add_term(*e, c);
        }
        f
    }

    pub fn coords(&self, basis: &[Exps]) -> Vec<u64> {
        basis.iter().map(|e| self.coeff(e)).collect()
    }

    fn add_term(&mut self, e: Exps, c: u64) {
        let c = c % self.p;
        if c == 0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0);
        *entry = modp::add(*entry, c, self.p);
        if *entry == 0 {
            self.terms.remove(&e);
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn has_x35(&self) -> bool {
        self.x35
    }

    pub fn terms(&self) -> &BTreeMap<Exps, u64> {
        &self.terms
    }

    pub fn coeff(&self, e: &Exps) -> u64 {
        self.terms.get(e).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.weight, self.x35), (other.weight, other.x35), "adding polynomials of different weight");
        let mut f = self.clone();
        for (e, &c) in &other.terms {
            f.add_term(*e, c);
        }
        f
    }

    pub fn scale(&self, c: u64) -> Self {
        let mut f = Self::zero(self.p, self.weight, self.x35);
        for (e, &x) in &self.terms {
            f.add_term(*e, x * (c % self.p) % self.p);
        }
        f
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(self.p - 1))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert!(!(self.x35 && other.x35), "x35² is outside the represented range");
        let mut f = Self::zero(self.p, self.weight + other.weight, self.x35 || other.x35);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e = [e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3]];
                f.add_term(e, c1 * c2 % self.p);
            }
        }
        f
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = IsobaricPoly::one(self.p);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn leading(&self, order: MonomialOrder) -> Option<(Exps, u64)> {
        self.terms.iter().max_by(|a, b| order.cmp(a.0, b.0)).map(|(e, &c)| (*e, c))
    }

    /// Scaled so the leading coefficient is 1 (zero stays zero).
    pub fn monic(&self, order: MonomialOrder) -> Self {
        match self.leading(order) {
            None => self.clone(),
            Some((_, c)) => self.scale(modp::inv(c, self.p)),
        }
    }

    /// Division by a single polynomial: self = q·h + r with no term of r
    /// divisible by the leading term of h.
    pub fn div_rem(&self, h: &Self, order: MonomialOrder) -> (Self, Self) {
        assert!(!h.x35, "divisor must be an even polynomial");
        let (lt, lc) = h.leading(order).expect("division by zero polynomial");
        let lc_inv = modp::inv(lc, self.p);
        let mut rem = self.clone();
        let mut quo = Self::zero(self.p, self.weight - h.weight, self.x35);
        let mut r = Self::zero(self.p, self.weight, self.x35);
        while let Some((m, c)) = rem.leading(order) {
            if divides(&lt, &m) {
                let e = [m[0] - lt[0], m[1] - lt[1], m[2] - lt[2], m[3] - lt[3]];
                let t = c * lc_inv % self.p;
                quo.add_term(e, t);
                let mut th = IsobaricPoly::monomial(self.p, e, self.x35, t).mul(h);
                th.weight = self.weight;
                rem = rem.sub(&th);
            } else {
                r.add_term(m, c);
                rem.terms.remove(&m);
            }
        }
        (quo, r)
    }

    pub fn display(&self, order: MonomialOrder) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut terms: Vec<(&Exps, &u64)> = self.terms.iter().collect();
        terms.sort_by(|a, b| order.cmp(b.0, a.0));
        let names = ["x4", "x6", "x10", "x12"];
        terms
            .iter()
            .map(|(e, c)| {
                let mut vars: Vec<String> = (0..4)
                    .filter(|&i| e[i] > 0)
                    .map(|i| if e[i] == 1 { names[i].to_string() } else { format!("{}^{}", names[i], e[i]) })
                    .collect();
                if self.x35 {
                    vars.push("x35".into());
                }
                if vars.is_empty() {
                    vars.push("1".into());
                }
                format!("{} * {}", c, vars.join(" "))
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Display for IsobaricPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display(MonomialOrder::GrevLex))
    }
}

/// g_0, g_1, … with f = Σ g_i h^i and each g_i free of multiples of LT(h).
/// Empty for f = 0.
pub fn reduction_expansion(f: &IsobaricPoly, h: &IsobaricPoly, order: MonomialOrder) -> Vec<IsobaricPoly> {
    let mut out = Vec::new();
    let mut cur = f.clone();
    while !cur.is_zero() {
        let (q, r) = cur.div_rem(h, order);
        out.push(r);
        cur = q;
    }
    out
}

/// Number of times h divides f exactly; `None` (∞) for f = 0.
pub fn ord_h(f: &IsobaricPoly, h: &IsobaricPoly, order: MonomialOrder) -> Option<u32> {
    if f.is_zero() {
        return None;
    }
    let mut n = 0;
    let mut cur = f.clone();
    loop {
        let (q, r) = cur.div_rem(h, order);
        if !r.is_zero() {
            return Some(n);
        }
        n += 1;
        cur = q;
    }
}

/// ω = k − (p − 1)·ord, or 0 for the zero polynomial.
pub fn filtration_of(f: &IsobaricPoly, h: &IsobaricPoly, order: MonomialOrder) -> i64 {
    match ord_h(f, h, order) {
        None => 0,
        Some(e) => f.weight() - h.weight() * e as i64,
    }
}

/// Echelonized images together with the change of basis that produced them.
#[derive(Clone, Debug)]
pub struct Echelon {
    /// Row i gives the coefficients of the i-th new element in the old basis.
    pub transform: Mat,
    pub images: Vec<IsobaricPoly>,
    pub ords: Vec<Option<u32>>,
}

impl Echelon {
    /// Applies the recorded change of basis to polynomials attached to the
    /// original basis.
    pub fn apply(&self, forms: &[IsobaricPoly]) -> Vec<IsobaricPoly> {
        (0..self.transform.rows)
            .map(|i| {
                forms
                    .iter()
                    .enumerate()
                    .fold(IsobaricPoly::zero(forms[0].p(), forms[0].weight(), forms[0].has_x35()), |acc, (j, f)| {
                        acc.add(&f.scale(self.transform.get(i, j)))
                    })
            })
            .collect()
    }
}

/// Row-reduces the stacked reduction-expansion coordinates of the images so
/// that ord_h of any combination is the minimum over its support.
pub fn echelon_basis(images: &[IsobaricPoly], h: &IsobaricPoly, order: MonomialOrder) -> Echelon {
    let m = images.len();
    if m == 0 {
        return Echelon { transform: Mat::zeros(0, 0, h.p()), images: vec![], ords: vec![] };
    }
    let p = h.p();
    let (w, x35) = (images[0].weight(), images[0].has_x35());
    let exps: Vec<Vec<IsobaricPoly>> = images.iter().map(|f| reduction_expansion(f, h, order)).collect();
    let blocks = exps.iter().map(|g| g.len()).max().unwrap_or(0);
    let lt = h.leading(order).unwrap().0;
    let x35_w = if x35 { 35 } else { 0 };
    let block_basis: Vec<Vec<Exps>> = (0..blocks)
        .map(|j| {
            even_monomials(w - x35_w - j as i64 * h.weight(), order).into_iter().filter(|e| !divides(&lt, e)).collect()
        })
        .collect();
    let mut block_start = vec![0usize];
    for b in &block_basis {
        block_start.push(block_start.last().unwrap() + b.len());
    }
    let ncols = *block_start.last().unwrap();
    let rows: Vec<Vec<u64>> = exps
        .iter()
        .map(|gs| {
            let mut v = Vec::with_capacity(ncols);
            for (j, basis) in block_basis.iter().enumerate() {
                match gs.get(j) {
                    Some(g) => v.extend(g.coords(basis)),
                    None => v.extend(std::iter::repeat_n(0, basis.len())),
                }
            }
            v
        })
        .collect();
    let (pivots, _, t) = Mat::from_rows(&rows, ncols, p).rref_with_transform();
    let ords = (0..m).map(|i| pivots.get(i).map(|&c| (block_start.partition_point(|&s| s <= c) - 1) as u32)).collect();
    let mut out = Echelon { transform: t, images: vec![], ords };
    let mut imgs = out.apply(images);
    for f in &mut imgs {
        f.weight = w;
        f.x35 = x35;
    }
    out.images = imgs;
    out
}

/// Linear solver for ψ_k^{-1} on reduced keys up to b_k.
struct Solver {
    keys: Vec<HalfIntMat>,
    x35: bool,
    basis: Vec<Exps>,
    mat: Mat,
    rows: Vec<usize>,
    inv: Mat,
}

impl Solver {
    fn solve(&self, values: &[u64], p: u64, weight: i64) -> Result<Vec<u64>> {
        let n = self.basis.len();
        let rhs: Vec<u64> = self.rows.iter().map(|&r| values[r]).collect();
        let x = if n == 0 { vec![] } else { self.inv.mul_vec(&rhs) };
        let check = if n == 0 { vec![0; self.keys.len()] } else { self.mat.mul_vec(&x) };
        if check != values {
            return Err(Error::Inconsistent { weight, p });
        }
        Ok(x)
    }
}

/// Mod-p expansions of the generators and their monomials, with solvers for ψ^{-1}.
pub struct ModpRing {
    p: u64,
    bound: usize,
    order: MonomialOrder,
    gens: [QExp2; 5],
    eis: Mutex<HashMap<(u32, u32), Arc<QExp2>>>,
    cusp: Mutex<HashMap<(u32, u32, bool), Arc<QExp2>>>,
    full: Mutex<HashMap<(Exps, bool), Arc<QExp2>>>,
    restricted: Mutex<HashMap<(Exps, bool, usize), Arc<Vec<u64>>>>,
    solvers: Mutex<HashMap<i64, Arc<Solver>>>,
    h: OnceLock<IsobaricPoly>,
}

impl ModpRing {
    /// Ring for prime p ≥ 5 with expansions exact to `bound` (at most the cache bound).
    pub fn new(cache: &GeneratorCache, p: u64, bound: usize) -> Result<Self> {
        if p < 5 || !crate::nt::is_prime(p) {
            return Err(Error::InvalidArgument(format!("p = {p} must be a prime ≥ 5")));
        }
        if bound > cache.bound() {
            return Err(Error::BoundTooSmall { have: cache.bound(), need: bound });
        }
        let red = |g: Gen| -> Result<QExp2> { cache.get(g)?.truncate(bound)?.reduce_mod(p) };
        Ok(ModpRing {
            p,
            bound,
            order: MonomialOrder::GrevLex,
            gens: [red(Gen::E4)?, red(Gen::E6)?, red(Gen::X10)?, red(Gen::X12)?, red(Gen::X35)?],
            eis: Mutex::default(),
            cusp: Mutex::default(),
            full: Mutex::default(),
            restricted: Mutex::default(),
            solvers: Mutex::default(),
            h: OnceLock::new(),
        })
    }

    pub fn with_order(mut self, order: MonomialOrder) -> Self {
        self.order = order;
        self
    }

    /// Replaces X35 by c·X35 (a p-unit); used to check scale invariance.
    pub fn with_x35_scaled(mut self, c: u64) -> Self {
        let p = self.p;
        let x = self.gens[4].map_p(35, |_, v| v * (c % p) % p);
        self.gens[4] = x;
        self
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn order(&self) -> MonomialOrder {
        self.order
    }

    /// Reduced generator: 0 = E4, 1 = E6, 2 = X10, 3 = X12, 4 = X35.
    pub fn generator(&self, i: usize) -> &QExp2 {
        &self.gens[i]
    }

    fn eis_power(&self, a: u32, b: u32) -> Result<Arc<QExp2>> {
        if let Some(f) = self.eis.lock().unwrap().get(&(a, b)) {
            return Ok(f.clone());
        }
        let f = if a > 0 {
            self.eis_power(a - 1, b)?.mul(&self.gens[0])?
        } else if b > 0 {
            self.eis_power(0, b - 1)?.mul(&self.gens[1])?
        } else {
            QExp2::one(self.p, self.bound)
        };
        Ok(self.eis.lock().unwrap().entry((a, b)).or_insert(Arc::new(f)).clone())
    }

    fn cusp_power(&self, c: u32, d: u32, x35: bool) -> Result<Arc<QExp2>> {
        if let Some(f) = self.cusp.lock().unwrap().get(&(c, d, x35)) {
            return Ok(f.clone());
        }
        let f = if x35 {
            self.cusp_power(c, d, false)?.mul(&self.gens[4])?
        } else if c > 0 {
            self.cusp_power(c - 1, d, false)?.mul(&self.gens[2])?
        } else if d > 0 {
            self.cusp_power(0, d - 1, false)?.mul(&self.gens[3])?
        } else {
            QExp2::one(self.p, self.bound)
        };
        Ok(self.cusp.lock().unwrap().entry((c, d, x35)).or_insert(Arc::new(f)).clone())
    }

    /// Full expansion of a monomial (times X35 if flagged).
    pub fn monomial_expansion(&self, e: &Exps, x35: bool) -> Result<Arc<QExp2>> {
        if let Some(f) = self.full.lock().unwrap().get(&(*e, x35)) {
            return Ok(f.clone());
        }
        let f = self.eis_power(e[0], e[1])?.mul(&*self.cusp_power(e[2], e[3], x35)?)?;
        Ok(self.full.lock().unwrap().entry((*e, x35)).or_insert(Arc::new(f)).clone())
    }

    /// Monomial coefficients at the reduced keys with max(a, c) ≤ b.
    pub fn monomial_at_reduced(&self, e: &Exps, x35: bool, b: usize) -> Result<Arc<Vec<u64>>> {
        if b > self.bound {
            return Err(Error::BoundTooSmall { have: self.bound, need: b });
        }
        if let Some(v) = self.restricted.lock().unwrap().get(&(*e, x35, b)) {
            return Ok(v.clone());
        }
        let keys = reduced_keys(b);
        let v = if let Some(f) = self.full.lock().unwrap().get(&(*e, x35)).cloned() {
            f.residues_at(self.p, &keys)?
        } else {
            self.eis_power(e[0], e[1])?.mul_at_keys(&*self.cusp_power(e[2], e[3], x35)?, &keys)?
        };
        Ok(self.restricted.lock().unwrap().entry((*e, x35, b)).or_insert(Arc::new(v)).clone())
    }

    /// ψ(f) as a full expansion truncated to `bound`.
    pub fn psi(&self, f: &IsobaricPoly, bound: usize) -> Result<QExp2> {
        if bound > self.bound {
            return Err(Error::BoundTooSmall { have: self.bound, need: bound });
        }
        let p = self.p;
        let mut acc = vec![0u64; crate::qexp::KeyLayout::get(bound).len()];
        for (e, &c) in f.terms() {
            let m = self.monomial_expansion(e, f.has_x35())?.truncate(bound)?;
            for (x, &y) in acc.iter_mut().zip(m.values_p()) {
                *x = (*x + c * y) % p;
            }
        }
        Ok(QExp2::from_values_p(f.weight(), p, bound, acc))
    }

    /// ψ(f) at the reduced keys with max(a, c) ≤ b.
    pub fn psi_at_reduced(&self, f: &IsobaricPoly, b: usize) -> Result<Vec<u64>> {
        let p = self.p;
        let mut acc = vec![0u64; reduced_keys(b).len()];
        for (e, &c) in f.terms() {
            let m = self.monomial_at_reduced(e, f.has_x35(), b)?;
            for (x, &y) in acc.iter_mut().zip(m.iter()) {
                *x = (*x + c * y) % p;
            }
        }
        Ok(acc)
    }

    fn solver(&self, k: i64) -> Result<Arc<Solver>> {
        if let Some(s) = self.solvers.lock().unwrap().get(&k) {
            return Ok(s.clone());
        }
        let b = sturm_bound(k);
        let keys = reduced_keys(b);
        let (x35, basis) = monomials(k, self.order);
        let n = basis.len();
        let mut mat = Mat::zeros(keys.len(), n, self.p);
        for (j, e) in basis.iter().enumerate() {
            let col = self.monomial_at_reduced(e, x35, b)?;
            for (i, &v) in col.iter().enumerate() {
                mat.set(i, j, v);
            }
        }
        let rows = mat.transpose().rref();
        if rows.len() < n {
            return Err(Error::RankDeficient { weight: k, p: self.p, rank: rows.len(), cols: n });
        }
        let mut sq = Mat::zeros(n, n, self.p);
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..n {
                sq.set(i, j, mat.get(r, j));
            }
        }
        let inv = if n == 0 { sq.clone() } else { sq.inverse().expect("selected rows are independent") };
        let s = Arc::new(Solver { keys, x35, basis, mat, rows, inv });
        Ok(self.solvers.lock().unwrap().entry(k).or_insert(s).clone())
    }

    /// The unique weight-k polynomial f with ψ(f) = F.
    pub fn psi_inv(&self, f: &QExp2, k: i64) -> Result<IsobaricPoly> {
        let b = sturm_bound(k);
        if f.bound() < b {
            return Err(Error::BoundTooSmall { have: f.bound(), need: b });
        }
        let s = self.solver(k)?;
        let values = f.residues_at(self.p, &s.keys)?;
        let x = s.solve(&values, self.p, k)?;
        Ok(IsobaricPoly::from_coords(self.p, k, s.x35, &s.basis, &x))
    }

    /// ψ^{-1} from coefficient values already listed on reduced keys ≤ b_k.
    pub fn psi_inv_values(&self, values: &[u64], k: i64) -> Result<IsobaricPoly> {
        let s = self.solver(k)?;
        let x = s.solve(values, self.p, k)?;
        Ok(IsobaricPoly::from_coords(self.p, k, s.x35, &s.basis, &x))
    }

    /// The weight-(p − 1) polynomial h with ψ(h) = 1.
    pub fn h_poly(&self) -> Result<IsobaricPoly> {
        if let Some(h) = self.h.get() {
            return Ok(h.clone());
        }
        let k = self.p as i64 - 1;
        let n = reduced_keys(sturm_bound(k)).len();
        let mut one = vec![0u64; n];
        one[0] = 1;
        let h = self.psi_inv_values(&one, k)?;
        let _ = self.h.set(h);
        Ok(self.h.get().unwrap().clone())
    }

    pub fn reduction_expansion(&self, f: &IsobaricPoly) -> Result<Vec<IsobaricPoly>> {
        Ok(reduction_expansion(f, &self.h_poly()?, self.order))
    }

    pub fn ord_h(&self, f: &IsobaricPoly) -> Result<Option<u32>> {
        Ok(ord_h(f, &self.h_poly()?, self.order))
    }

    /// Filtration ω₁ of a weight-k form; 0 for zero and constant forms.
    pub fn omega1(&self, f: &QExp2, k: i64) -> Result<i64> {
        let poly = self.psi_inv(f, k)?;
        Ok(filtration_of(&poly, &self.h_poly()?, self.order))
    }

    pub fn echelon_basis(&self, images: &[IsobaricPoly]) -> Result<Echelon> {
        Ok(echelon_basis(images, &self.h_poly()?, self.order))
    }

    /// Kernel of Θ on weight k, echelonized, with the membership flag for
    /// "some kernel element has filtration exactly k".
    pub fn kernel_theta(&self, k: i64) -> Result<ThetaKernel> {
        let p = self.p;
        let (x35, basis) = monomials(k, self.order);
        let h = self.h_poly()?;
        let n = basis.len();
        let b = sturm_bound(k + p as i64 + 1);
        if b > self.bound {
            return Err(Error::BoundTooSmall { have: self.bound, need: b });
        }
        let keys = reduced_keys(b);
        let inv4 = modp::inv(4, p);
        let mut mat = Mat::zeros(keys.len(), n, p);
        for (j, e) in basis.iter().enumerate() {
            let col = self.monomial_at_reduced(e, x35, b)?;
            for (i, t) in keys.iter().enumerate() {
                let d = modp::from_i64(t.discriminant(), p) * inv4 % p;
                mat.set(i, j, d * col[i] % p);
            }
        }
        let kernel: Vec<IsobaricPoly> =
            mat.nullspace().into_iter().map(|v| IsobaricPoly::from_coords(p, k, x35, &basis, &v)).collect();
        let ech = echelon_basis(&kernel, &h, self.order);
        let dim_k = kernel.len();
        // dim(K ∩ h·R_{k−p+1}) = dim K + dim hR − dim(K + hR).
        let (_, lower) = monomials(k - h.weight(), self.order);
        let h_mult: Vec<Vec<u64>> =
            lower.iter().map(|e| IsobaricPoly::monomial(p, *e, x35, 1).mul(&h).coords(&basis)).collect();
        let ker_rows: Vec<Vec<u64>> = kernel.iter().map(|f| f.coords(&basis)).collect();
        let rank_of = |rows: &[Vec<u64>]| if rows.is_empty() { 0 } else { Mat::from_rows(rows, n, p).rank() };
        let dim_h = rank_of(&h_mult);
        let dim_sum = rank_of(&[ker_rows.clone(), h_mult].concat());
        let dim_cap = dim_k + dim_h - dim_sum;
        let (elements, ords) = (ech.images, ech.ords);
        Ok(ThetaKernel { p, k, dim: dim_k, appears: dim_k > dim_cap, elements, ords })
    }
}

/// Kernel of Θ in one weight.
#[derive(Clone, Debug)]
pub struct ThetaKernel {
    pub p: u64,
    pub k: i64,
    pub dim: usize,
    /// Some kernel element has filtration k.
    pub appears: bool,
    /// Echelonized kernel basis.
    pub elements: Vec<IsobaricPoly>,
    pub ords: Vec<Option<u32>>,
}

impl ThetaKernel {
    pub fn filtrations(&self) -> Vec<i64> {
        self.elements
            .iter()
            .zip(&self.ords)
            .map(|(f, o)| match o {
                None => 0,
                Some(e) => f.weight() - (self.p as i64 - 1) * *e as i64,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::LazyLock;

    static CACHE: LazyLock<GeneratorCache> = LazyLock::new(|| GeneratorCache::new(8));

    fn random_poly(rng: &mut ChaCha8Rng, p: u64, k: i64) -> IsobaricPoly {
        let (x35, basis) = monomials(k, MonomialOrder::GrevLex);
        let v: Vec<u64> = basis.iter().map(|_| rng.gen_range(0..p)).collect();
        IsobaricPoly::from_coords(p, k, x35, &basis, &v)
    }

    #[test]
    fn monomial_lists() {
        assert_eq!(monomials(4, MonomialOrder::GrevLex), (false, vec![[1, 0, 0, 0]]));
        let (_, m10) = monomials(10, MonomialOrder::GrevLex);
        assert_eq!(m10, vec![[1, 1, 0, 0], [0, 0, 1, 0]]);
        assert_eq!(monomials(35, MonomialOrder::GrevLex), (true, vec![[0, 0, 0, 0]]));
        assert_eq!(dim(2), 0);
        assert_eq!(dim(18), 4);
        assert_eq!(dim(37), 0);
    }

    #[test]
    fn sturm_values() {
        assert_eq!(sturm_bound(12), 1);
        assert_eq!(sturm_bound(102), 10);
        assert_eq!(sturm_bound(35), 3);
        assert_eq!(sturm_bound(0), 0);
    }

    #[test]
    fn h_for_small_primes() {
        let r5 = ModpRing::new(&CACHE, 5, 8).unwrap();
        assert_eq!(r5.h_poly().unwrap(), IsobaricPoly::monomial(5, [1, 0, 0, 0], false, 1));
        assert_eq!(r5.psi(&r5.h_poly().unwrap(), 8).unwrap(), QExp2::constant(4, 5, 8, 1));
        let r7 = ModpRing::new(&CACHE, 7, 8).unwrap();
        assert_eq!(r7.h_poly().unwrap(), IsobaricPoly::monomial(7, [0, 1, 0, 0], false, 1));
        let r11 = ModpRing::new(&CACHE, 11, 8).unwrap();
        let h = r11.h_poly().unwrap();
        assert_eq!(h.weight(), 10);
        // Solved on b_10 = 1, re-checked on the full bound 8.
        assert_eq!(r11.psi(&h, 8).unwrap(), QExp2::constant(10, 11, 8, 1));
    }

    #[test]
    fn psi_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [5u64, 7] {
            let ring = ModpRing::new(&CACHE, p, 8).unwrap();
            for k in [0i64, 4, 12, 20, 24, 35, 39, 41] {
                let f = random_poly(&mut rng, p, k);
                let g = ring.psi(&f, sturm_bound(k)).unwrap();
                assert_eq!(ring.psi_inv(&g, k).unwrap(), f, "p={p} k={k}");
            }
        }
        let ring = ModpRing::new(&CACHE, 5, 8).unwrap();
        assert!(ring.psi_inv(&QExp2::zero(20, 5, 2), 20).unwrap().is_zero());
    }

    #[test]
    fn inconsistent_input_rejected() {
        let ring = ModpRing::new(&CACHE, 7, 8).unwrap();
        let x10 = ring.generator(2).clone();
        // X10 is not a weight-12 form.
        assert!(matches!(ring.psi_inv(&x10.with_weight(12), 12), Err(Error::Inconsistent { .. })));
    }

    #[test]
    fn reduction_and_ord() {
        let p = 5;
        let m = |e: Exps| IsobaricPoly::monomial(p, e, false, 1);
        let h = m([1, 0, 0, 0]);
        let o = MonomialOrder::GrevLex;
        let z = IsobaricPoly::zero(p, 4, false);
        assert_eq!(reduction_expansion(&h, &h, o), vec![z, IsobaricPoly::one(p)]);
        let f = m([0, 1, 1, 0]);
        assert_eq!(reduction_expansion(&f, &h, o), vec![f.clone()]);
        let g = reduction_expansion(&m([2, 1, 0, 0]), &h, o);
        assert_eq!(g.len(), 3);
        assert!(g[0].is_zero() && g[1].is_zero());
        assert_eq!(g[2], m([0, 1, 0, 0]));
        assert_eq!(ord_h(&IsobaricPoly::zero(p, 8, false), &h, o), None);
        let cube = h.pow(3).mul(&m([0, 1, 0, 1]).add(&m([3, 1, 0, 0]).scale(2)));
        assert_eq!(ord_h(&cube, &h, o), Some(3));
    }

    #[test]
    fn reconstruction_and_two_ord_computations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cache = GeneratorCache::new(3);
        for p in [5u64, 7, 11, 13] {
            let ring = ModpRing::new(&cache, p, 3).unwrap();
            let h = ring.h_poly().unwrap();
            for order in [MonomialOrder::GrevLex, MonomialOrder::Lex] {
                for k in [24i64, 36, 40, 48, 71] {
                    let mut f = random_poly(&mut rng, p, k);
                    if rng.gen_bool(0.5) {
                        let lower = random_poly(&mut rng, p, k - 2 * h.weight());
                        if !lower.is_zero() {
                            f = lower.mul(&h).mul(&h);
                        }
                    }
                    let gs = reduction_expansion(&f, &h, order);
                    let mut sum = IsobaricPoly::zero(p, k, f.has_x35());
                    for (i, g) in gs.iter().enumerate() {
                        let mut t = g.mul(&h.pow(i as u32));
                        t.weight = k;
                        sum = sum.add(&t);
                    }
                    assert_eq!(sum, f);
                    let first = gs.iter().position(|g| !g.is_zero()).map(|i| i as u32);
                    assert_eq!(first, ord_h(&f, &h, order));
                }
            }
        }
    }

    #[test]
    fn multiplication_by_h_is_invisible_to_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [5u64, 7, 11] {
            let ring = ModpRing::new(&CACHE, p, 4).unwrap();
            let h = ring.h_poly().unwrap();
            for k in [8i64, 16, 22] {
                let f = random_poly(&mut rng, p, k);
                let lhs = ring.psi(&f.mul(&h), 4).unwrap();
                let rhs = ring.psi(&f, 4).unwrap();
                assert_eq!(lhs.values_p(), rhs.values_p());
            }
        }
    }

    #[test]
    fn echelon_single_and_order_invariance() {
        let p = 5;
        let h = IsobaricPoly::monomial(p, [1, 0, 0, 0], false, 1);
        let f = IsobaricPoly::monomial(p, [2, 1, 0, 0], false, 3);
        let e = echelon_basis(std::slice::from_ref(&f), &h, MonomialOrder::GrevLex);
        assert_eq!(e.images, vec![f.monic(MonomialOrder::GrevLex)]);
        assert_eq!(e.ords, vec![Some(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ring = ModpRing::new(&CACHE, 7, 2).unwrap();
        let h7 = ring.h_poly().unwrap();
        for _ in 0..10 {
            let imgs: Vec<IsobaricPoly> = (0..4)
                .map(|_| {
                    let i = rng.gen_range(0..3);
                    random_poly(&mut rng, 7, 18 - 6 * i as i64).mul(&h7.pow(i))
                })
                .collect();
            let mut a: Vec<_> = echelon_basis(&imgs, &h7, MonomialOrder::GrevLex).ords;
            let mut b: Vec<_> = echelon_basis(&imgs, &h7, MonomialOrder::Lex).ords;
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn display_format() {
        let f = IsobaricPoly::from_terms(5, 18, false, [([3, 1, 0, 0], 1), ([0, 1, 0, 1], 3)]).unwrap();
        assert_eq!(f.display(MonomialOrder::GrevLex), "1 * x4^3 x6 + 3 * x6 x12");
        assert_eq!(IsobaricPoly::monomial(7, [0; 4], true, 2).to_string(), "2 * x35");
        assert!(IsobaricPoly::from_terms(5, 18, false, [([1, 0, 0, 0], 1)]).is_err());
    }
}
