//! Dense linear algebra over prime fields, plus a small exact rational kernel solver.

use crate::modp;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub p: u64,
    data: Vec<u64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize, p: u64) -> Self {
        Mat { rows, cols, p, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize, p: u64) -> Self {
        let mut m = Self::zeros(n, n, p);
        for i in 0..n {
            m.set(i, i, 1 % p);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u64>], cols: usize, p: u64) -> Self {
        let mut m = Self::zeros(rows.len(), cols, p);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols);
            for (j, &x) in r.iter().enumerate() {
                m.set(i, j, x % p);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: u64) {
        self.data[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows, self.p);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.cols);
        let p = self.p;
        (0..self.rows).map(|i| self.row(i).iter().zip(v).fold(0u64, |s, (&a, &b)| (s + a * b) % p)).collect()
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let p = self.p;
        let mut out = Mat::zeros(self.rows, other.cols, p);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * out.cols + j;
                    out.data[idx] = (out.data[idx] + a * other.get(k, j)) % p;
                }
            }
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// In-place reduced row echelon form, searching pivots only among the first
    /// `pivot_cols` columns. Returns the pivot columns.
    pub fn rref_limited(&mut self, pivot_cols: usize) -> Vec<usize> {
        let p = self.p;
        let cols = self.cols;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..pivot_cols.min(cols) {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, pr);
            let iv = modp::inv(self.get(r, c), p);
            for j in c..cols {
                let idx = r * cols + j;
                self.data[idx] = self.data[idx] * iv % p;
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let f = self.get(i, c);
                if f == 0 {
                    continue;
                }
                let nf = p - f;
                for j in c..cols {
                    let src = self.data[r * cols + j];
                    if src != 0 {
                        let idx = i * cols + j;
                        self.data[idx] = (self.data[idx] + nf * src) % p;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rref(&mut self) -> Vec<usize> {
        let c = self.cols;
        self.rref_limited(c)
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of {x : A x = 0}, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<u64>> {
        let p = self.p;
        let mut m = self.clone();
        let pivots = m.rref();
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![0u64; self.cols];
            v[free] = 1 % p;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = modp::neg(m.get(r, free), p);
            }
            basis.push(v);
        }
        basis
    }

    /// RREF together with the invertible transform: returns (pivots, R, T) with T·A = R.
    pub fn rref_with_transform(&self) -> (Vec<usize>, Mat, Mat) {
        let n = self.rows;
        let mut aug = Mat::zeros(n, self.cols + n, self.p);
        for i in 0..n {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, self.cols + i, 1 % self.p);
        }
        let pivots = aug.rref_limited(self.cols);
        let mut r = Mat::zeros(n, self.cols, self.p);
        let mut t = Mat::zeros(n, n, self.p);
        for i in 0..n {
            for j in 0..self.cols {
                r.set(i, j, aug.get(i, j));
            }
            for j in 0..n {
                t.set(i, j, aug.get(i, self.cols + j));
            }
        }
        (pivots, r, t)
    }

    pub fn inverse(&self) -> Option<Mat> {
        if self.rows != self.cols {
            return None;
        }
        let (pivots, _, t) = self.rref_with_transform();
        (pivots.len() == self.rows).then_some(t)
    }
}

/// Kernel of a rational matrix given by rows.
pub fn rational_nullspace(rows: &[Vec<BigRational>], cols: usize) -> Vec<Vec<BigRational>> {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(pr) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let iv = BigRational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x = &*x * &iv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[i][free].clone();
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero() {
        let mut id = Mat::identity(4, 7);
        let piv = id.rref();
        assert_eq!(piv, vec![0, 1, 2, 3]);
        assert_eq!(id, Mat::identity(4, 7));
        assert!(Mat::identity(4, 7).nullspace().is_empty());
        let z = Mat::zeros(3, 5, 7);
        assert_eq!(z.nullspace().len(), 5);
    }

    #[test]
    fn random_kernel_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rows: Vec<Vec<u64>> = (0..6).map(|_| (0..9).map(|_| rng.gen_range(0..7)).collect()).collect();
            let a = Mat::from_rows(&rows, 9, 7);
            let ker = a.nullspace();
            for v in &ker {
                assert!(a.mul_vec(v).iter().all(|&x| x == 0));
            }
            assert_eq!(a.rank() + ker.len(), 9);
        }
    }

    #[test]
    fn transform_reproduces_rref() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let rows: Vec<Vec<u64>> = (0..5).map(|_| (0..4).map(|_| rng.gen_range(0..5)).collect()).collect();
            let a = Mat::from_rows(&rows, 4, 5);
            let (piv, r, t) = a.rref_with_transform();
            assert_eq!(t.mul(&a), r);
            assert_eq!(piv.len(), a.rank());
            assert!(t.inverse().is_some());
        }
    }

    #[test]
    fn rational_kernel() {
        let q = |n: i64| BigRational::from_integer(n.into());
        let rows = vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(7)]];
        let ker = rational_nullspace(&rows, 3);
        assert_eq!(ker.len(), 1);
        for r in &rows {
            let s: BigRational = r.iter().zip(&ker[0]).map(|(a, b)| a * b).sum();
            assert!(s.is_zero());
        }
    }
}
