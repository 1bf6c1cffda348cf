//! Gaussian conditioning, Fourier-domain sampling and conditioning by Kriging.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::circulant::{BccbMatrix, CirculantMatrix};
use crate::fft::Fft2;
use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

/// Hard constraint `x[selector[i]] = values[i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HardConstraint {
    selector: Vec<usize>,
    values: Vec<f64>,
}

impl HardConstraint {
    pub fn new(selector: Vec<usize>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if selector.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: selector.len(), got: values.len() });
        }
        if selector.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("constraint indices must be strictly increasing".into()));
        }
        if let Some(&last) = selector.last() {
            if last >= dim {
                return Err(Error::InvalidArgument("constraint index out of range".into()));
            }
        }
        Ok(Self { selector, values })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn selector(&self) -> &[usize] {
        &self.selector
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.selector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selector.is_empty()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.selector.iter().zip(&self.values).map(|(&i, &b)| (x[i] - b).abs()).fold(0.0, f64::max)
    }
}

/// Complement of a sorted index set within `0..dim`.
pub fn complement(selector: &[usize], dim: usize) -> Vec<usize> {
    let mut mask = vec![true; dim];
    for &i in selector {
        mask[i] = false;
    }
    (0..dim).filter(|&i| mask[i]).collect()
}

/// Mean and covariance of `x | A x + e = y` for `x ~ N(μ, Σ)`, `e ~ N(0, Σe)`
/// and a selection matrix `A`.
pub fn conditional_params(
    mu: &[f64],
    sigma: &Matrix,
    selector: &[usize],
    sigma_e: Option<&Matrix>,
    y: &[f64],
) -> Result<(Vec<f64>, Matrix)> {
    let n = mu.len();
    if sigma.rows() != n || sigma.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.rows() });
    }
    if y.len() != selector.len() {
        return Err(Error::DimensionMismatch { expected: selector.len(), got: y.len() });
    }
    if selector.is_empty() {
        return Ok((mu.to_vec(), sigma.clone()));
    }
    let all: Vec<usize> = (0..n).collect();
    let cross = sigma.select(&all, selector);
    let mut inner = sigma.select(selector, selector);
    if let Some(e) = sigma_e {
        inner = inner.add(e);
    }
    let chol = Cholesky::try_new(&inner).ok_or(Error::SingularInnovation)?;
    let resid: Vec<f64> = selector.iter().zip(y).map(|(&i, &yi)| yi - mu[i]).collect();
    let shift = cross.matvec(&chol.solve(&resid));
    let mean = mu.iter().zip(&shift).map(|(a, b)| a + b).collect();
    let gain = chol.solve_matrix(&cross.transpose());
    let mut cov = sigma.sub(&cross.matmul(&gain));
    cov.symmetrize();
    Ok((mean, cov))
}

/// Gaussian on an `n_v x n_h` cyclic lattice specified in the Fourier domain.
#[derive(Debug, Clone)]
pub struct FourierGaussian {
    n_v: usize,
    n_h: usize,
    mean_hat: Vec<C64>,
    eig_cov: Vec<f64>,
}

impl FourierGaussian {
    pub fn new(n_v: usize, n_h: usize, mean_hat: Vec<C64>, eig_cov: Vec<f64>) -> Result<Self> {
        let n = n_v * n_h;
        if mean_hat.len() != n || eig_cov.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mean_hat.len().min(eig_cov.len()) });
        }
        let max = eig_cov.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let tol = 1e-12 * max;
        let mut eig_cov = eig_cov;
        for (index, v) in eig_cov.iter_mut().enumerate() {
            if *v < 0.0 {
                if -*v <= tol {
                    *v = 0.0;
                } else {
                    return Err(Error::NegativeEigenvalue { index, value: *v });
                }
            }
        }
        Ok(Self { n_v, n_h, mean_hat, eig_cov })
    }

    pub fn mean_hat(&self) -> &[C64] {
        &self.mean_hat
    }

    pub fn eig_cov(&self) -> &[f64] {
        &self.eig_cov
    }

    /// One draw `Re(idft(μ̂ + Λ^{1/2} z))` with `Re z, Im z` iid standard normal.
    ///
    /// The real part of a unit-variance complex draw already carries the full
    /// covariance `Fᴴ Λ F`, so no extra scaling is applied.
    pub fn sample<R: Rng + ?Sized>(&self, plan: &Fft2, rng: &mut R) -> Vec<f64> {
        debug_assert_eq!((plan.n_v(), plan.n_h()), (self.n_v, self.n_h));
        let mut v: Vec<C64> = self
            .mean_hat
            .iter()
            .zip(&self.eig_cov)
            .map(|(m, &l)| {
                let s = libm::sqrt(l);
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                m + C64::new(a * s, b * s)
            })
            .collect();
        plan.inverse_in_place(&mut v);
        v.into_iter().map(|z| z.re).collect()
    }
}

/// Zero-mean draw with eigenvalues `eig_cov` on an `n_v x n_h` lattice.
pub fn sample_stationary<R: Rng + ?Sized>(plan: &Fft2, eig_cov: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let g = FourierGaussian::new(
        plan.n_v(),
        plan.n_h(),
        vec![C64::new(0.0, 0.0); eig_cov.len()],
        eig_cov.to_vec(),
    )?;
    Ok(g.sample(plan, rng))
}

/// Action of a covariance needed by conditioning by Kriging.
pub trait CovarianceAction {
    fn dim(&self) -> usize;
    /// `A Σ Aᵀ` for the selection `A`.
    fn gram(&self, selector: &[usize]) -> Matrix;
    /// `Σ Aᵀ u`.
    fn apply_transpose_selection(&self, selector: &[usize], u: &[f64]) -> Vec<f64>;
}

impl CovarianceAction for Matrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn gram(&self, selector: &[usize]) -> Matrix {
        self.select(selector, selector)
    }

    fn apply_transpose_selection(&self, selector: &[usize], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (&j, &uj) in selector.iter().zip(u) {
            for (o, &s) in out.iter_mut().zip(self.col(j)) {
                *o += s * uj;
            }
        }
        out
    }
}

impl CovarianceAction for CirculantMatrix {
    fn dim(&self) -> usize {
        self.order()
    }

    fn gram(&self, selector: &[usize]) -> Matrix {
        let n = self.order();
        let b = self.base();
        Matrix::from_fn(selector.len(), selector.len(), |i, j| b[(selector[i] + n - selector[j]) % n])
    }

    fn apply_transpose_selection(&self, selector: &[usize], u: &[f64]) -> Vec<f64> {
        let n = self.order();
        let b = self.base();
        let mut out = vec![0.0; n];
        for (&j, &uj) in selector.iter().zip(u) {
            for (r, o) in out.iter_mut().enumerate() {
                *o += b[(r + n - j) % n] * uj;
            }
        }
        out
    }
}

impl CovarianceAction for BccbMatrix {
    fn dim(&self) -> usize {
        self.n_v() * self.n_h()
    }

    fn gram(&self, selector: &[usize]) -> Matrix {
        Matrix::from_fn(selector.len(), selector.len(), |i, j| self.entry(selector[i], selector[j]))
    }

    fn apply_transpose_selection(&self, selector: &[usize], u: &[f64]) -> Vec<f64> {
        let mut sparse = vec![0.0; self.dim()];
        for (&j, &uj) in selector.iter().zip(u) {
            sparse[j] = uj;
        }
        self.matvec(&sparse).expect("dimension checked by construction")
    }
}

/// Prepared Kriging correction `x ↦ x − Σ Aᵀ (A Σ Aᵀ)⁻¹ (A x − b)`.
#[derive(Debug, Clone)]
pub struct Kriging {
    constraint: HardConstraint,
    gram: Option<Cholesky>,
}

impl Kriging {
    pub fn new<C: CovarianceAction + ?Sized>(cov: &C, constraint: HardConstraint) -> Result<Self> {
        if constraint.is_empty() {
            return Ok(Self { constraint, gram: None });
        }
        let g = cov.gram(constraint.selector());
        let chol = Cholesky::with_nugget(&g, "constraint gram").map_err(|_| Error::SingularConstraintGram)?;
        Ok(Self { constraint, gram: Some(chol) })
    }

    pub fn constraint(&self) -> &HardConstraint {
        &self.constraint
    }

    pub fn apply<C: CovarianceAction + ?Sized>(&self, cov: &C, x: &mut [f64]) {
        self.correct(cov, x);
        // the projection is exact in exact arithmetic; pin the constrained
        // coordinates to remove rounding residue
        for (&i, &b) in self.constraint.selector().iter().zip(self.constraint.values()) {
            x[i] = b;
        }
    }

    /// The correction alone, without pinning the constrained coordinates.
    pub fn correct<C: CovarianceAction + ?Sized>(&self, cov: &C, x: &mut [f64]) {
        let Some(chol) = &self.gram else { return };
        let sel = self.constraint.selector();
        let resid: Vec<f64> = sel.iter().zip(self.constraint.values()).map(|(&i, &b)| x[i] - b).collect();
        let u = chol.solve(&resid);
        let corr = cov.apply_transpose_selection(sel, &u);
        for (xi, c) in x.iter_mut().zip(corr) {
            *xi -= c;
        }
    }
}

/// One-shot conditioning by Kriging.
pub fn condition_by_kriging<C: CovarianceAction + ?Sized>(
    x: &[f64],
    cov: &C,
    constraint: &HardConstraint,
) -> Result<Vec<f64>> {
    let k = Kriging::new(cov, constraint.clone())?;
    let mut out = x.to_vec();
    k.apply(cov, &mut out);
    Ok(out)
}

/// Log-density of `N(μ, LLᵀ)` at `x`.
pub fn gaussian_logpdf(x: &[f64], mu: &[f64], chol: &Cholesky) -> f64 {
    let r: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let z = chol.solve_lower(&r);
    let q: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (x.len() as f64 * libm::log(2.0 * PI) + chol.log_det() + q)
}

/// Log-density of a constrained Gaussian draw through its free coordinates.
pub fn constrained_logdensity(x: &[f64], mu: &[f64], sigma: &Matrix, free: &[usize]) -> Result<f64> {
    let n = x.len();
    let fixed = complement(free, n);
    for &i in &fixed {
        let deviation = (x[i] - mu[i]).abs();
        if deviation > 1e-8 {
            return Err(Error::ConstraintViolated { index: i, deviation });
        }
    }
    let s = sigma.select(free, free);
    let chol = Cholesky::with_nugget(&s, "free-coordinate covariance")?;
    let xu: Vec<f64> = free.iter().map(|&i| x[i]).collect();
    let mu_u: Vec<f64> = free.iter().map(|&i| mu[i]).collect();
    Ok(gaussian_logpdf(&xu, &mu_u, &chol))
}
