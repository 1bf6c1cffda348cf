//! Circulant and block-circulant-with-circulant-blocks (BCCB) matrices.
//!
//! A circulant of order `n` is stored by its first column `base`, so that
//! `C[i][j] = base[(i - j) mod n]`, together with its eigenvalues
//! `eigs = √n · dft(base)`. With `F` the unitary DFT matrix, `C = Fᴴ diag(eigs) F`
//! and `C x = idft(eigs ⊙ dft(x))`. Sums, products, transposes and inverses
//! stay circulant and are computed on the eigenvalues.
//!
//! A BCCB matrix on an `n_v x n_h` lattice is stored by its base grid
//! (first column, reshaped column-major) with eigenvalues `√n · dft2(base)`.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::fft::{Fft, Fft2};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Relative tolerance below which an eigenvalue counts as zero when inverting.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CirculantMatrix {
    base: Vec<f64>,
    eigs: Vec<C64>,
}

impl CirculantMatrix {
    pub fn from_base(base: Vec<f64>) -> Self {
        assert!(!base.is_empty(), "circulant order must be positive");
        let plan = Fft::new(base.len());
        let s = libm::sqrt(base.len() as f64);
        let eigs = plan.forward_real(&base).into_iter().map(|z| z * s).collect();
        Self { base, eigs }
    }

    /// Build from eigenvalues; the imaginary part of the implied base is dropped.
    pub fn from_eigs(eigs: Vec<C64>) -> Self {
        let base = base_from_eigs(&eigs);
        Self { base, eigs }
    }

    pub fn identity(n: usize) -> Self {
        let mut base = alloc::vec![0.0; n];
        base[0] = 1.0;
        Self::from_base(base)
    }

    pub fn order(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn eigs(&self) -> &[C64] {
        &self.eigs
    }

    /// Real parts of the eigenvalues (exact for symmetric bases).
    pub fn real_eigs(&self) -> Vec<f64> {
        self.eigs.iter().map(|z| z.re).collect()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let base = self.base.iter().zip(&other.base).map(|(a, b)| a + b).collect();
        let eigs = self.eigs.iter().zip(&other.eigs).map(|(a, b)| a + b).collect();
        Ok(Self { base, eigs })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        Ok(Self::from_eigs(self.eigs.iter().zip(&other.eigs).map(|(a, b)| a * b).collect()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            base: self.base.iter().map(|b| b * s).collect(),
            eigs: self.eigs.iter().map(|z| z * s).collect(),
        }
    }

    /// Transpose: reversed base, conjugated eigenvalues.
    pub fn transpose(&self) -> Self {
        let n = self.order();
        let base = (0..n).map(|i| self.base[(n - i) % n]).collect();
        let eigs = self.eigs.iter().map(|z| z.conj()).collect();
        Self { base, eigs }
    }

    pub fn inverse(&self) -> Result<Self> {
        let max = self.eigs.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
        let min = self.eigs.iter().fold(f64::INFINITY, |m: f64, z| m.min(z.norm()));
        let tol = SINGULAR_TOL * max;
        if !(min > tol) {
            return Err(Error::SingularCirculant { min_abs: min, tol });
        }
        Ok(Self::from_eigs(self.eigs.iter().map(|z| z.inv()).collect()))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: x.len() });
        }
        let plan = Fft::new(self.order());
        let mut v = plan.forward_real(x);
        for (a, l) in v.iter_mut().zip(&self.eigs) {
            *a *= l;
        }
        plan.inverse_in_place(&mut v);
        Ok(v.into_iter().map(|z| z.re).collect())
    }

    pub fn dense(&self) -> Matrix {
        let n = self.order();
        Matrix::from_fn(n, n, |i, j| self.base[(i + n - j) % n])
    }

    fn check_order(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: other.order() });
        }
        Ok(())
    }
}

pub fn circ_from_base(base: Vec<f64>) -> CirculantMatrix {
    CirculantMatrix::from_base(base)
}

/// `base = idft(eigs) / √n`, real part.
pub fn base_from_eigs(eigs: &[C64]) -> Vec<f64> {
    let plan = Fft::new(eigs.len());
    let s = 1.0 / libm::sqrt(eigs.len() as f64);
    plan.inverse(eigs).into_iter().map(|z| z.re * s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BccbMatrix {
    n_v: usize,
    n_h: usize,
    base: Vec<f64>,
    eigs: Vec<C64>,
}

impl BccbMatrix {
    pub fn from_base(n_v: usize, n_h: usize, base: Vec<f64>) -> Result<Self> {
        if base.len() != n_v * n_h {
            return Err(Error::DimensionMismatch { expected: n_v * n_h, got: base.len() });
        }
        let s = libm::sqrt(base.len() as f64);
        let eigs = Fft2::new(n_v, n_h).forward_real(&base).into_iter().map(|z| z * s).collect();
        Ok(Self { n_v, n_h, base, eigs })
    }

    pub fn from_eigs(n_v: usize, n_h: usize, eigs: Vec<C64>) -> Result<Self> {
        if eigs.len() != n_v * n_h {
            return Err(Error::DimensionMismatch { expected: n_v * n_h, got: eigs.len() });
        }
        let s = 1.0 / libm::sqrt(eigs.len() as f64);
        let base = Fft2::new(n_v, n_h).inverse(&eigs).into_iter().map(|z| z.re * s).collect();
        Ok(Self { n_v, n_h, base, eigs })
    }

    /// `R_h ⊗ R_v`, acting on column-major `n_v x n_h` grids.
    pub fn from_kronecker(h: &CirculantMatrix, v: &CirculantMatrix) -> Self {
        let (n_v, n_h) = (v.order(), h.order());
        let mut base = Vec::with_capacity(n_v * n_h);
        let mut eigs = Vec::with_capacity(n_v * n_h);
        for j in 0..n_h {
            for i in 0..n_v {
                base.push(v.base[i] * h.base[j]);
                eigs.push(v.eigs[i] * h.eigs[j]);
            }
        }
        Self { n_v, n_h, base, eigs }
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn eigs(&self) -> &[C64] {
        &self.eigs
    }

    pub fn real_eigs(&self) -> Vec<f64> {
        self.eigs.iter().map(|z| z.re).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_v * self.n_h;
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let plan = Fft2::new(self.n_v, self.n_h);
        let mut v = plan.forward_real(x);
        for (a, l) in v.iter_mut().zip(&self.eigs) {
            *a *= l;
        }
        plan.inverse_in_place(&mut v);
        Ok(v.into_iter().map(|z| z.re).collect())
    }

    /// Entry between lattice nodes `a` and `b` (linear column-major indices).
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let (ia, ja) = (a % self.n_v, a / self.n_v);
        let (ib, jb) = (b % self.n_v, b / self.n_v);
        let di = (ia + self.n_v - ib) % self.n_v;
        let dj = (ja + self.n_h - jb) % self.n_h;
        self.base[di + self.n_v * dj]
    }

    pub fn dense(&self) -> Matrix {
        let n = self.n_v * self.n_h;
        Matrix::from_fn(n, n, |a, b| self.entry(a, b))
    }
}
