//! Column-wise cyclic convolution on the extended lattice.
//!
//! The blur `w*` (length `n_v`) is stored with its centre at index `n_v/2`.
//! `P` is the half-period cyclic shift, so `W₀ = circ(P w*)` has `W₀ = I` when
//! `w* = e_{n_v/2}`, and the image convolution is `W = I_{n_h} ⊗ W₀`.
//! Swapping the roles of blur and image, `W c = Γ w*` with the stacked
//! `Γ_j = circ(P c_j)`; `B` is the same construction applied to a fixed
//! mean field.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::circulant::CirculantMatrix;
use crate::fft::Fft;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// `(P x)[l] = x[(l + n/2) mod n]`; `P` is symmetric and its own inverse.
pub fn shift_half(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n % 2 != 0 {
        return Err(Error::OddLattice(n));
    }
    let h = n / 2;
    Ok((0..n).map(|l| x[(l + h) % n]).collect())
}

/// Dense `P`.
pub fn shift_half_dense(n: usize) -> Result<Matrix> {
    if n % 2 != 0 {
        return Err(Error::OddLattice(n));
    }
    Ok(Matrix::from_fn(n, n, |i, j| if (i + n / 2) % n == j { 1.0 } else { 0.0 }))
}

/// Eigenvalues of `circ(P x)` for a length-`n_v` vector.
pub fn shifted_eigs(plan: &Fft, x: &[f64]) -> Result<Vec<C64>> {
    let px = shift_half(x)?;
    let s = libm::sqrt(x.len() as f64);
    Ok(plan.forward_real(&px).into_iter().map(|z| z * s).collect())
}

/// Eigenvalue grid (column `j` = eigenvalues of `circ(P c_j)`).
pub fn column_shifted_eigs(plan: &Fft, grid: &[f64], n_v: usize) -> Result<Vec<C64>> {
    if grid.len() % n_v != 0 {
        return Err(Error::DimensionMismatch { expected: n_v, got: grid.len() });
    }
    let mut out = Vec::with_capacity(grid.len());
    for col in grid.chunks(n_v) {
        out.extend(shifted_eigs(plan, col)?);
    }
    Ok(out)
}

/// Column-wise `W₀`-type convolution: each column of `grid` multiplied by
/// the circulant with eigenvalues `eigs` (length `n_v`).
pub fn convolve_columns(plan: &Fft, eigs: &[C64], grid: &[f64]) -> Vec<f64> {
    let n_v = eigs.len();
    let mut out = Vec::with_capacity(grid.len());
    for col in grid.chunks(n_v) {
        let mut v = plan.forward_real(col);
        for (a, l) in v.iter_mut().zip(eigs) {
            *a *= l;
        }
        plan.inverse_in_place(&mut v);
        out.extend(v.into_iter().map(|z| z.re));
    }
    out
}

/// Convolution operators for a given blur and image (or mean) field.
#[derive(Debug, Clone)]
pub struct ConvolutionOperators {
    n_v: usize,
    n_h: usize,
    w0: CirculantMatrix,
    gamma_eigs: Vec<C64>,
}

impl ConvolutionOperators {
    pub fn new(w_star: &[f64], c: &[f64], n_h: usize) -> Result<Self> {
        let n_v = w_star.len();
        if n_v % 2 != 0 {
            return Err(Error::OddLattice(n_v));
        }
        if c.len() != n_v * n_h {
            return Err(Error::DimensionMismatch { expected: n_v * n_h, got: c.len() });
        }
        let plan = Fft::new(n_v);
        let w0 = CirculantMatrix::from_base(shift_half(w_star)?);
        let gamma_eigs = column_shifted_eigs(&plan, c, n_v)?;
        Ok(Self { n_v, n_h, w0, gamma_eigs })
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn w0(&self) -> &CirculantMatrix {
        &self.w0
    }

    /// Eigenvalues of `W₀`; the grid of `W` repeats them in every column.
    pub fn w_eigs(&self) -> &[C64] {
        self.w0.eigs()
    }

    /// Column-major `n_v x n_h` grid of `Λ_{Γ_j}`.
    pub fn gamma_eigs(&self) -> &[C64] {
        &self.gamma_eigs
    }

    pub fn gamma_eigs_col(&self, j: usize) -> &[C64] {
        &self.gamma_eigs[j * self.n_v..(j + 1) * self.n_v]
    }

    /// `W x` for a grid `x`.
    pub fn apply_w(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_v * self.n_h {
            return Err(Error::DimensionMismatch { expected: self.n_v * self.n_h, got: x.len() });
        }
        Ok(convolve_columns(&Fft::new(self.n_v), self.w0.eigs(), x))
    }

    /// `Γ v` for a length-`n_v` vector.
    pub fn apply_gamma(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_v {
            return Err(Error::DimensionMismatch { expected: self.n_v, got: v.len() });
        }
        let plan = Fft::new(self.n_v);
        let vh = plan.forward_real(v);
        let mut out = Vec::with_capacity(self.n_v * self.n_h);
        for j in 0..self.n_h {
            let mut col: Vec<C64> = vh.iter().zip(self.gamma_eigs_col(j)).map(|(a, l)| a * l).collect();
            plan.inverse_in_place(&mut col);
            out.extend(col.into_iter().map(|z| z.re));
        }
        Ok(out)
    }

    /// Dense `W = I ⊗ W₀`.
    pub fn w_dense(&self) -> Matrix {
        let w0 = self.w0.dense();
        let nv = self.n_v;
        Matrix::from_fn(nv * self.n_h, nv * self.n_h, |a, b| {
            if a / nv == b / nv {
                w0[(a % nv, b % nv)]
            } else {
                0.0
            }
        })
    }

    /// Dense stacked `Γ` (`n x n_v`).
    pub fn gamma_dense(&self) -> Matrix {
        let nv = self.n_v;
        let blocks: Vec<Matrix> =
            (0..self.n_h).map(|j| CirculantMatrix::from_eigs(self.gamma_eigs_col(j).to_vec()).dense()).collect();
        Matrix::from_fn(nv * self.n_h, nv, |a, b| blocks[a / nv][(a % nv, b)])
    }
}

/// Builds `W₀`, `W` and `Γ` from a blur and an image field.
pub fn build_convolution_ops(w_star: &[f64], c: &[f64], n_h: usize) -> Result<ConvolutionOperators> {
    ConvolutionOperators::new(w_star, c, n_h)
}

/// Eigenvalues of `∂W₀/∂w*_i = circ(e_s)`, `s = (i - n_v/2) mod n_v`.
pub fn blur_derivative_eigs(n_v: usize, i: usize) -> Vec<C64> {
    let s = (i + n_v - n_v / 2) % n_v;
    (0..n_v)
        .map(|f| {
            let th = -2.0 * core::f64::consts::PI * ((f * s) % n_v) as f64 / n_v as f64;
            C64::new(libm::cos(th), libm::sin(th))
        })
        .collect()
}

/// Offset `s` such that `(∂W₀/∂w*_i · x)[r] = x[r - s]`.
pub fn blur_derivative_shift(n_v: usize, i: usize) -> usize {
    (i + n_v - n_v / 2) % n_v
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn shift_has_half_diagonals() {
        let p = shift_half_dense(8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let diff = (i as i64 - j as i64).abs();
                let on = diff == 4;
                assert_eq!(p[(i, j)] == 1.0, on);
            }
        }
        assert_eq!(shift_half(&[1.0, 2.0, 3.0]), Err(Error::OddLattice(3)));
    }

    #[test]
    fn centred_impulse_is_identity_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = vec![0.0; 8];
        w[4] = 1.0;
        let c = rvec(24, &mut rng);
        let ops = build_convolution_ops(&w, &c, 3).unwrap();
        let wc = ops.apply_w(&c).unwrap();
        for (a, b) in wc.iter().zip(&c) {
            assert!((a - b).abs() < 1e-14);
        }
        let zero = build_convolution_ops(&[0.0; 8], &c, 3).unwrap();
        assert!(zero.apply_w(&c).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn image_and_blur_roles_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let w = rvec(8, &mut rng);
            let c = rvec(24, &mut rng);
            let ops = build_convolution_ops(&w, &c, 3).unwrap();
            let wc = ops.w_dense().matvec(&c);
            let gw = ops.gamma_dense().matvec(&w);
            let gw_fast = ops.apply_gamma(&w).unwrap();
            let wc_fast = ops.apply_w(&c).unwrap();
            for i in 0..24 {
                assert!((wc[i] - gw[i]).abs() < 1e-12);
                assert!((wc[i] - gw_fast[i]).abs() < 1e-12);
                assert!((wc[i] - wc_fast[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_lattice_rejected() {
        assert!(matches!(build_convolution_ops(&[0.0; 7], &[0.0; 7], 1), Err(Error::OddLattice(7))));
    }

    #[test]
    fn derivative_eigs_match_finite_difference() {
        let n = 8;
        let plan = Fft::new(n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let direct = shifted_eigs(&plan, &e).unwrap();
            let closed = blur_derivative_eigs(n, i);
            for (a, b) in direct.iter().zip(&closed) {
                assert!((a - b).norm() < 1e-13);
            }
            let s = blur_derivative_shift(n, i);
            let x: Vec<f64> = (0..n).map(|r| r as f64).collect();
            let y = CirculantMatrix::from_eigs(closed).matvec(&x).unwrap();
            for r in 0..n {
                assert!((y[r] - x[(r + n - s) % n]).abs() < 1e-12);
            }
        }
    }
}
