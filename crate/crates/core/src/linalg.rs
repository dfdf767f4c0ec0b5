//! Dense complex matrices sized for antenna arrays (a handful of rows).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch { expected: rows, found: bad.len() });
        }
        Ok(Self::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: rhs.rows });
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        Ok((0..self.rows).map(|r| (0..self.cols).map(|c| self[(r, c)] * x[c]).sum()).collect())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Lower Cholesky factor of a Hermitian positive definite matrix.
    pub fn cholesky(&self) -> Result<CMatrix> {
        let n = self.rows;
        if n != self.cols {
            return Err(Error::DimensionMismatch { expected: n, found: self.cols });
        }
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let d = libm::sqrt(d);
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Inverse of a Hermitian positive definite matrix via Cholesky.
    pub fn hpd_inverse(&self) -> Result<CMatrix> {
        let l = self.cholesky()?;
        let n = self.rows;
        // L^{-1}, lower triangular
        let mut linv = CMatrix::zeros(n, n);
        for j in 0..n {
            linv[(j, j)] = Complex64::new(1.0 / l[(j, j)].re, 0.0);
            for i in j + 1..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in j..i {
                    s -= l[(i, k)] * linv[(k, j)];
                }
                linv[(i, j)] = s / l[(i, i)].re;
            }
        }
        // A^{-1} = L^{-H} L^{-1}
        let mut inv = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = Complex64::new(0.0, 0.0);
                for k in i..n {
                    s += linv[(k, i)].conj() * linv[(k, j)];
                }
                inv[(i, j)] = s;
                inv[(j, i)] = s.conj();
            }
        }
        Ok(inv)
    }

    /// Thin singular value decomposition by one-sided (Hestenes) Jacobi.
    ///
    /// Returns triplets sorted by descending singular value. Each right vector
    /// has its first nonzero entry rotated onto the nonnegative real axis and
    /// each left vector is `A v / sigma` (zero when `sigma` vanishes).
    pub fn svd(&self) -> Vec<SingularTriplet> {
        let (m, n) = (self.rows, self.cols);
        let mut a = self.clone();
        let mut v = CMatrix::identity(n);
        for _sweep in 0..80 {
            let mut rotated = false;
            for i in 0..n {
                for j in i + 1..n {
                    let (mut alpha, mut beta) = (0.0, 0.0);
                    let mut gamma = Complex64::new(0.0, 0.0);
                    for r in 0..m {
                        alpha += a[(r, i)].norm_sqr();
                        beta += a[(r, j)].norm_sqr();
                        gamma += a[(r, i)].conj() * a[(r, j)];
                    }
                    let g = gamma.norm();
                    if g <= f64::EPSILON * libm::sqrt(alpha * beta) || g == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let phase = (gamma / g).conj();
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = c * t;
                    for r in 0..m {
                        let xi = a[(r, i)];
                        let xj = a[(r, j)] * phase;
                        a[(r, i)] = xi * c - xj * s;
                        a[(r, j)] = xi * s + xj * c;
                    }
                    for r in 0..n {
                        let xi = v[(r, i)];
                        let xj = v[(r, j)] * phase;
                        v[(r, i)] = xi * c - xj * s;
                        v[(r, j)] = xi * s + xj * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut triplets: Vec<SingularTriplet> = (0..n)
            .map(|j| {
                let mut right = v.column(j);
                let norm = libm::sqrt(right.iter().map(|z| z.norm_sqr()).sum::<f64>());
                right.iter_mut().for_each(|z| *z /= norm);
                if let Some(first) = right.iter().find(|z| z.norm() > 1e-12).copied() {
                    let rot = first.conj() / first.norm();
                    right.iter_mut().for_each(|z| *z *= rot);
                }
                let image = self.matvec(&right).expect("square-compatible");
                let sigma = libm::sqrt(image.iter().map(|z| z.norm_sqr()).sum::<f64>());
                let left = if sigma > 0.0 {
                    image.iter().map(|z| z / sigma).collect()
                } else {
                    vec![Complex64::new(0.0, 0.0); m]
                };
                SingularTriplet { sigma, left, right }
            })
            .collect();
        triplets.sort_by(|x, y| y.sigma.total_cmp(&x.sigma));
        triplets
    }
}

/// One singular value with its left and right vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// `sum conj(a_i) b_i`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    libm::sqrt(norm_sq(a))
}
