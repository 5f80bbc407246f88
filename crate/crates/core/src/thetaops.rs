//! Theta operators Θ^[1], Θ^[2], the restrictions A^(j)(M), and mod-p
//! singularity tests.

use crate::error::{Error, Result};
use crate::halfint::HalfIntMat;
use crate::modp;
use crate::qexp::QExp2;
use crate::ringmodp::{sturm_bound, ModpRing};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::fmt;

fn det_q(t: &HalfIntMat) -> BigRational {
    BigRational::new(BigInt::from(t.discriminant()), BigInt::from(4))
}

fn det_p(t: &HalfIntMat, p: u64) -> u64 {
    modp::from_i64(t.discriminant(), p) * modp::inv(4, p) % p
}

fn char_check(f: &QExp2) -> Result<()> {
    match f.characteristic() {
        2 | 3 => Err(Error::InvalidArgument("characteristic must be 0 or a prime ≥ 5".into())),
        _ => Ok(()),
    }
}

/// Θ = Θ^[2]: multiplies a_F(T) by det T. In characteristic p the weight
/// label becomes k + p + 1.
pub fn theta(f: &QExp2) -> Result<QExp2> {
    theta_iter(f, 1)
}

/// Θ applied m times.
pub fn theta_iter(f: &QExp2, m: u32) -> Result<QExp2> {
    char_check(f)?;
    let p = f.characteristic();
    if m == 0 {
        return Ok(f.clone());
    }
    Ok(if p == 0 {
        f.map_q(f.weight(), |t, x| {
            let d = det_q(t);
            let mut acc = x.clone();
            for _ in 0..m {
                acc *= &d;
            }
            acc
        })
    } else {
        let w = f.weight() + m as i64 * (p as i64 + 1);
        f.map_p(w, |t, x| modp::pow(det_p(t, p), m as u64, p) * x % p)
    })
}

/// Θ^[1](F) = Σ T a_F(T) q^T, stored entrywise.
#[derive(Clone, Debug)]
pub struct Theta1Series {
    pub weight: i64,
    pub a: QExp2,
    pub b: QExp2,
    pub c: QExp2,
}

impl Theta1Series {
    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.c.is_zero()
    }

    pub fn reduce_mod(&self, p: u64) -> Result<Theta1Series> {
        Ok(Theta1Series {
            weight: self.weight,
            a: self.a.reduce_mod(p)?,
            b: self.b.reduce_mod(p)?,
            c: self.c.reduce_mod(p)?,
        })
    }

    pub fn serialize(&self) -> String {
        format!("A\n{}B\n{}C\n{}", self.a.serialize(), self.b.serialize(), self.c.serialize())
    }
}

/// The B part carries the off-diagonal entry b/2 as b (doubled convention, so
/// its vanishing mod odd p is unaffected).
pub fn theta1(f: &QExp2) -> Result<Theta1Series> {
    char_check(f)?;
    let p = f.characteristic();
    let part = |sel: fn(&HalfIntMat) -> i64| {
        if p == 0 {
            f.map_q(f.weight(), move |t, x| x * BigRational::from_integer(sel(t).into()))
        } else {
            f.map_p(f.weight(), move |t, x| modp::from_i64(sel(t), p) * x % p)
        }
    };
    Ok(Theta1Series { weight: f.weight(), a: part(|t| t.a), b: part(|t| t.b), c: part(|t| t.c) })
}

/// T^[j] ≡ 0 mod M: j = 1 means M | gcd(a, b, c); j = 2 means M | D(T).
pub fn passes_aop(t: &HalfIntMat, j: u8, m: u64) -> bool {
    let m = m as i64;
    match j {
        1 => t.content() % m == 0,
        _ => t.discriminant() % m == 0,
    }
}

/// Entrywise version of the j = 1 test: T/M is again half-integral.
pub fn divisible_as_matrix(t: &HalfIntMat, m: u64) -> bool {
    let m = m as i64;
    t.a % m == 0 && t.c % m == 0 && t.b % m == 0
}

/// F|A^(j)(M). For j = 2 and M = p in characteristic p the weight label becomes k + p² − 1.
pub fn a_op(f: &QExp2, j: u8, m: u64) -> Result<QExp2> {
    if !(j == 1 || j == 2) {
        return Err(Error::InvalidArgument(format!("j = {j} must be 1 or 2")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("M must be positive".into()));
    }
    let p = f.characteristic();
    if p == 0 {
        Ok(f.map_q(
            f.weight(),
            |t, x| if passes_aop(t, j, m) { x.clone() } else { BigRational::from_integer(0.into()) },
        ))
    } else {
        let w = if j == 2 && m == p { f.weight() + (p * p) as i64 - 1 } else { f.weight() };
        Ok(f.map_p(w, |t, x| if passes_aop(t, j, m) { x } else { 0 }))
    }
}

/// Checks F|A(p) = F·E_{p−1}^{p+1} − Θ^{p−1}(F) on the expansion of F, with
/// E_{p−1} taken as ψ(h).
pub fn verify_aop_identity(f: &QExp2, ring: &ModpRing) -> Result<bool> {
    let p = ring.p();
    let f = if f.characteristic() == p { f.clone() } else { f.reduce_mod(p)? };
    let bound = f.bound();
    if bound > ring.bound() {
        return Err(Error::BoundTooSmall { have: ring.bound(), need: bound });
    }
    let hh = ring.psi(&ring.h_poly()?, bound)?;
    let lhs = a_op(&f, 2, p)?;
    let rhs = f.mul(&hh.pow(p as u32 + 1)?)?.sub(&theta_iter(&f, p as u32 - 1)?)?;
    Ok(lhs.values_p() == rhs.values_p())
}

fn require_window(f: &QExp2) -> Result<()> {
    let need = sturm_bound(f.weight());
    if f.bound() < need {
        return Err(Error::BoundTooSmall { have: f.bound(), need });
    }
    Ok(())
}

fn nonzero_keys(f: &QExp2, p: u64) -> Result<Vec<HalfIntMat>> {
    let g = if f.characteristic() == p { f.clone() } else { f.reduce_mod(p)? };
    Ok(g.keys().iter().zip(g.values_p()).filter(|(_, &v)| v != 0).map(|(t, _)| *t).collect())
}

/// Largest rank of a key carrying a nonzero coefficient mod p (0 for zero forms).
pub fn p_rank(f: &QExp2, p: u64) -> Result<u8> {
    require_window(f)?;
    Ok(nonzero_keys(f, p)?.iter().map(|t| t.rank()).max().unwrap_or(0))
}

/// Every positive-definite coefficient vanishes mod p.
pub fn is_mod_p_singular(f: &QExp2, p: u64) -> Result<bool> {
    Ok(p_rank(f, p)? < 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum KernelType {
    /// Mod-p singular.
    A,
    /// Every positive-definite key with nonzero coefficient has content divisible by p.
    B,
    /// Some positive-definite key with nonzero coefficient has content prime to p.
    C,
}

impl fmt::Display for KernelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelType::A => "a",
            KernelType::B => "b",
            KernelType::C => "c",
        })
    }
}

/// Type of a nonzero element of the mod-p kernel of Θ.
pub fn classify_kernel_type(f: &QExp2, p: u64) -> Result<KernelType> {
    require_window(f)?;
    let g = if f.characteristic() == p { f.clone() } else { f.reduce_mod(p)? };
    if g.is_zero() {
        return Err(Error::InvalidArgument("form vanishes mod p".into()));
    }
    if !theta(&g)?.is_zero() {
        return Err(Error::InvalidArgument("form is not in the kernel of Θ mod p".into()));
    }
    let keys = nonzero_keys(&g, p)?;
    let pd: Vec<_> = keys.iter().filter(|t| t.rank() == 2).collect();
    Ok(if pd.is_empty() {
        KernelType::A
    } else if pd.iter().all(|t| t.content() % p as i64 == 0) {
        KernelType::B
    } else {
        KernelType::C
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genforms::{siegel_eisenstein, Gen, GeneratorCache};
    use crate::ringmodp::{monomials, IsobaricPoly, MonomialOrder};
    use proptest::prelude::*;
    use std::sync::LazyLock;

    static CACHE: LazyLock<GeneratorCache> = LazyLock::new(|| GeneratorCache::new(6));

    fn random_p(seed: &[u64], p: u64, bound: usize, sparse: u64) -> QExp2 {
        QExp2::from_fn_p(10, p, bound, |t| {
            let i = (t.a * 31 + t.b * 7 + t.c * 13).unsigned_abs() as usize;
            let v = seed[i % seed.len()] % p;
            // Sparsify on keys prime to p so some expansions land in the kernel.
            if sparse > 0 && t.content() % p as i64 != 0 && v % sparse != 0 {
                0
            } else {
                v
            }
        })
    }

    #[test]
    fn theta_basics() {
        let one = QExp2::constant(0, 0, 3, 1);
        assert!(theta(&one).unwrap().is_zero());
        assert!(theta1(&one).unwrap().is_zero());
        let e4 = siegel_eisenstein(4, 3).unwrap();
        let t2 = theta(&theta(&e4).unwrap()).unwrap();
        for (t, x) in e4.keys().iter().zip(e4.values_q()) {
            assert_eq!(t2.coeff_q(t), x * det_q(t) * det_q(t));
        }
        assert_eq!(theta_iter(&e4, 0).unwrap().values_q(), e4.values_q());
        let e4p = e4.reduce_mod(7).unwrap();
        assert!(theta(&e4p).unwrap().is_zero());
        assert_eq!(theta(&e4p).unwrap().weight(), 12);
        assert!(!theta1(&e4p).unwrap().is_zero());
    }

    #[test]
    fn theta_iter_fermat() {
        let x10 = CACHE.get(Gen::X10).unwrap().reduce_mod(7).unwrap();
        let it = theta_iter(&x10, 6).unwrap();
        for (t, (&x, &y)) in x10.keys().iter().zip(x10.values_p().iter().zip(it.values_p())) {
            if t.discriminant() % 7 == 0 {
                assert_eq!(y, 0);
            } else {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn theta1_b_part_is_odd() {
        let e6 = siegel_eisenstein(6, 3).unwrap();
        let th = theta1(&e6).unwrap();
        for t in e6.keys() {
            let m = HalfIntMat::new_unchecked(t.a, -t.b, t.c);
            assert_eq!(th.b.coeff_q(t), -th.b.coeff_q(&m));
        }
    }

    #[test]
    fn aop_examples() {
        let ring = ModpRing::new(&CACHE, 5, 6).unwrap();
        let m = |e| ring.psi(&IsobaricPoly::monomial(5, e, false, 1), 6).unwrap();
        assert!(a_op(&m([0, 1, 0, 1]), 2, 5).unwrap().is_zero());
        assert!(a_op(&m([2, 0, 1, 0]), 2, 5).unwrap().is_zero());
        let f = m([3, 1, 0, 0]);
        assert_eq!(a_op(&f, 2, 1).unwrap().values_p(), f.values_p());
        assert_eq!(a_op(&f, 1, 1).unwrap().values_p(), f.values_p());
        assert!(a_op(&f, 3, 5).is_err());
    }

    #[test]
    fn singularity() {
        let c = QExp2::constant(0, 5, 3, 2);
        assert!(is_mod_p_singular(&c, 5).unwrap());
        assert_eq!(p_rank(&c, 5).unwrap(), 0);
        let e4 = CACHE.get(Gen::E4).unwrap();
        assert!(is_mod_p_singular(&e4, 5).unwrap());
        assert_eq!(p_rank(&e4, 5).unwrap(), 0);
        let x10 = CACHE.get(Gen::X10).unwrap();
        assert!(!is_mod_p_singular(&x10, 7).unwrap());
        assert_eq!(classify_kernel_type(&e4, 7).unwrap(), KernelType::C);
        assert!(classify_kernel_type(&x10, 7).is_err());
    }

    #[test]
    fn aop_identity_on_monomials() {
        for p in [5u64, 7] {
            let ring = ModpRing::new(&CACHE, p, 4).unwrap();
            for k in (0..=20).step_by(2) {
                let (x35, basis) = monomials(k, MonomialOrder::GrevLex);
                for e in basis {
                    let f = ring.psi(&IsobaricPoly::monomial(p, e, x35, 1), 4).unwrap();
                    assert!(verify_aop_identity(&f, &ring).unwrap(), "p={p} {e:?}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn aop_projector(seed in proptest::collection::vec(0u64..1000, 1..40), j in 1u8..3, p in prop::sample::select(vec![5u64, 7, 11])) {
            let f = random_p(&seed, p, 4, 0);
            let a = a_op(&f, j, p).unwrap();
            let aa = a_op(&a, j, p).unwrap();
            prop_assert_eq!(aa.values_p(), a.values_p());
            let a = a.with_weight(f.weight());
            let rest = f.sub(&a).unwrap();
            prop_assert!(a_op(&rest, j, p).unwrap().is_zero());
            let back = rest.add(&a).unwrap();
            prop_assert_eq!(back.values_p(), f.values_p());
        }

        #[test]
        fn content_and_entry_tests_agree(a in 0i64..40, b in -40i64..40, c in 0i64..40, m in 1u64..12) {
            let t = HalfIntMat::new_unchecked(a, b, c);
            prop_assert_eq!(passes_aop(&t, 1, m), divisible_as_matrix(&t, m));
        }

        #[test]
        fn theta_op_implications(seed in proptest::collection::vec(0u64..1000, 1..40), p in prop::sample::select(vec![5u64, 7]), sparse in 0u64..3) {
            let f = random_p(&seed, p, 4, if sparse == 0 { 0 } else { 1000 });
            let t1 = theta1(&f).unwrap();
            let t2 = theta(&f).unwrap();
            if t1.is_zero() {
                prop_assert!(t2.is_zero());
            }
            let witness = f.keys().iter().zip(f.values_p()).any(|(t, &v)| v != 0 && t.content() % p as i64 != 0);
            prop_assert_eq!(!t1.is_zero(), witness);
        }
    }
}
