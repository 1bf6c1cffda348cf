//! The hierarchical deconvolution model on an extended cyclic lattice.
//!
//! * data: `d ~ N(W c, σ_d² R_d)` on the whole lattice, of which the observed
//!   window is fixed to `d_o`;
//! * image: `c ~ N(0, σ_c² R_c)` with `m` pixels fixed to `c_o`;
//! * blur: `w* ~ N(0, σ_w² R_w)` conditioned to vanish outside the central
//!   `k` entries, whose values form `ω ~ N(0, σ_w² R_ω)`;
//! * `σ_c², σ_w², ζ` inverse-gamma, and `σ_d² = ψ σ_c² σ_w² ζ`.
//!
//! `R_c = R_{c,h} ⊗ R_{c,v}` and `R_d = R_{d,h} ⊗ R_{d,v}` are BCCB.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::circulant::{BccbMatrix, CirculantMatrix};
use crate::convolution::shifted_eigs;
use crate::fft::{Fft, Fft2};
use crate::gauss::{complement, sample_stationary, HardConstraint, Kriging};
use crate::linalg::{Cholesky, Matrix};
use crate::special::{inv_gamma_logpdf, sample_inv_gamma};
use crate::{Error, Result};

/// Powered-exponential correlation `ρ(h) = exp(-(h/φ)^p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSpec {
    pub phi: f64,
    pub p: f64,
}

impl CorrelationSpec {
    pub fn new(phi: f64, p: f64) -> Result<Self> {
        let s = Self { phi, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0) || !self.phi.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("correlation range must be positive, got {}", self.phi)));
        }
        if !(self.p > 0.0 && self.p <= 2.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "correlation smoothness must lie in (0, 2], got {}",
                self.p
            )));
        }
        Ok(())
    }

    pub fn rho(&self, h: f64) -> f64 {
        libm::exp(-libm::pow(h / self.phi, self.p))
    }
}

/// Circulant correlation matrix with great-circle lag `min(j, n - j)`.
pub fn build_correlation(n: usize, spec: CorrelationSpec) -> CirculantMatrix {
    let base = (0..n).map(|j| spec.rho(j.min(n - j) as f64)).collect();
    CirculantMatrix::from_base(base)
}

fn positive_eigs(c: &CirculantMatrix, what: &'static str) -> Result<Vec<f64>> {
    let eigs = c.real_eigs();
    if eigs.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::IllConditioned(what));
    }
    Ok(eigs)
}

/// Exactly observed image pixels, in observed-window coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ImageMask {
    #[default]
    None,
    /// Every combination of the listed rows and columns.
    Product { rows: Vec<usize>, cols: Vec<usize> },
    /// Arbitrary `(row, col)` pixels.
    Pixels(Vec<(usize, usize)>),
}

/// Geometry of the extended lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    n_vo: usize,
    n_ho: usize,
    m_v: usize,
    m_h: usize,
    n_v: usize,
    n_h: usize,
    top: usize,
    k: usize,
    mask: ImageMask,
}

impl LatticeSpec {
    /// `m_v` padding rows are split evenly above and below the observed window
    /// (one extra row goes below if needed to make `n_v` even); `m_h` padding
    /// columns follow the last observed column.
    pub fn new(n_vo: usize, n_ho: usize, m_v: usize, m_h: usize, k: usize, mask: ImageMask) -> Result<Self> {
        if n_vo == 0 || n_ho == 0 {
            return Err(Error::InvalidArgument("observed dimensions must be positive".into()));
        }
        let top = m_v.div_ceil(2);
        let mut n_v = n_vo + 2 * top;
        if n_v % 2 == 1 {
            n_v += 1;
        }
        let n_h = n_ho + m_h;
        if k == 0 || k >= n_v {
            return Err(Error::InvalidArgument(alloc::format!("blur length {k} must lie in 1..{n_v}")));
        }
        let check = |r: usize, c: usize| -> Result<()> {
            if r >= n_vo || c >= n_ho {
                return Err(Error::InvalidArgument(alloc::format!(
                    "image observation ({r}, {c}) lies outside the {n_vo}x{n_ho} observed window"
                )));
            }
            Ok(())
        };
        match &mask {
            ImageMask::None => {}
            ImageMask::Product { rows, cols } => {
                for &r in rows {
                    for &c in cols {
                        check(r, c)?;
                    }
                }
                if rows.windows(2).any(|w| w[0] >= w[1]) || cols.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument("mask rows and columns must be strictly increasing".into()));
                }
            }
            ImageMask::Pixels(px) => {
                for &(r, c) in px {
                    check(r, c)?;
                }
            }
        }
        Ok(Self { n_vo, n_ho, m_v, m_h, n_v, n_h, top, k, mask })
    }

    /// Padding `m_v = ⌈n_v^o/2⌉`, `m_h = n_h^o`.
    pub fn with_default_padding(n_vo: usize, n_ho: usize, k: usize, mask: ImageMask) -> Result<Self> {
        Self::new(n_vo, n_ho, n_vo.div_ceil(2), n_ho, k, mask)
    }

    pub fn n_vo(&self) -> usize {
        self.n_vo
    }
    pub fn n_ho(&self) -> usize {
        self.n_ho
    }
    pub fn m_v(&self) -> usize {
        self.m_v
    }
    pub fn m_h(&self) -> usize {
        self.m_h
    }
    pub fn n_v(&self) -> usize {
        self.n_v
    }
    pub fn n_h(&self) -> usize {
        self.n_h
    }
    pub fn n(&self) -> usize {
        self.n_v * self.n_h
    }
    pub fn n_obs(&self) -> usize {
        self.n_vo * self.n_ho
    }
    /// First lattice row of the observed window.
    pub fn top(&self) -> usize {
        self.top
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn mask(&self) -> &ImageMask {
        &self.mask
    }

    /// Lattice index of observed-window pixel `(row, col)`.
    pub fn lattice_index(&self, row: usize, col: usize) -> usize {
        (self.top + row) + self.n_v * col
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (self.top..self.top + self.n_vo).collect()
    }

    pub fn observed_cols(&self) -> Vec<usize> {
        (0..self.n_ho).collect()
    }

    /// Sorted lattice indices of the observed data window.
    pub fn data_selector(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_obs());
        for j in 0..self.n_ho {
            for i in 0..self.n_vo {
                out.push(self.lattice_index(i, j));
            }
        }
        out
    }

    /// Sorted lattice indices of the exactly observed image pixels.
    pub fn image_selector(&self) -> Vec<usize> {
        let mut out: Vec<usize> = match &self.mask {
            ImageMask::None => Vec::new(),
            ImageMask::Product { rows, cols } => {
                let mut v = Vec::with_capacity(rows.len() * cols.len());
                for &c in cols {
                    for &r in rows {
                        v.push(self.lattice_index(r, c));
                    }
                }
                v
            }
            ImageMask::Pixels(px) => px.iter().map(|&(r, c)| self.lattice_index(r, c)).collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Lattice row and column sets when the image mask is a product.
    pub fn image_product(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match &self.mask {
            ImageMask::None => Some((Vec::new(), Vec::new())),
            ImageMask::Product { rows, cols } => {
                Some((rows.iter().map(|r| r + self.top).collect(), cols.clone()))
            }
            ImageMask::Pixels(px) => {
                let mut rows: Vec<usize> = px.iter().map(|p| p.0).collect();
                let mut cols: Vec<usize> = px.iter().map(|p| p.1).collect();
                rows.sort_unstable();
                rows.dedup();
                cols.sort_unstable();
                cols.dedup();
                let mut px_sorted = px.clone();
                px_sorted.sort_unstable();
                px_sorted.dedup();
                if px_sorted.len() != rows.len() * cols.len() {
                    return None;
                }
                Some((rows.iter().map(|r| r + self.top).collect(), cols))
            }
        }
    }

    /// Number of leading central blur entries to the left of `n_v/2`.
    pub fn blur_left(&self) -> usize {
        self.k / 2
    }

    /// Indices `n_v/2 - ⌊k/2⌋ .. n_v/2 - ⌊k/2⌋ + k` of the effective blur.
    pub fn blur_central(&self) -> Vec<usize> {
        let start = self.n_v / 2 - self.blur_left();
        (start..start + self.k).collect()
    }

    /// Blur indices constrained to zero.
    pub fn blur_constrained(&self) -> Vec<usize> {
        complement(&self.blur_central(), self.n_v)
    }
}

/// Hyperparameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub alpha_c: f64,
    pub beta_c: f64,
    pub alpha_w: f64,
    pub beta_w: f64,
    pub alpha_zeta: f64,
    pub beta_zeta: f64,
    pub psi: f64,
    pub blur: CorrelationSpec,
    pub image_h: CorrelationSpec,
    pub image_v: CorrelationSpec,
    pub noise_h: CorrelationSpec,
    pub noise_v: CorrelationSpec,
}

impl Default for HyperParams {
    fn default() -> Self {
        let field = CorrelationSpec { phi: 1.5, p: 1.0 };
        Self {
            alpha_c: 2.00001,
            beta_c: 1.0 / 500.0,
            alpha_w: 2.01,
            beta_w: 10.0,
            alpha_zeta: 3.0,
            beta_zeta: 0.1,
            psi: 1.0,
            blur: CorrelationSpec { phi: 2.0, p: 1.98 },
            image_h: field,
            image_v: field,
            noise_h: field,
            noise_v: field,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha_c", self.alpha_c),
            ("beta_c", self.beta_c),
            ("alpha_w", self.alpha_w),
            ("beta_w", self.beta_w),
            ("alpha_zeta", self.alpha_zeta),
            ("beta_zeta", self.beta_zeta),
            ("psi", self.psi),
        ];
        for (name, value) in named {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveScale { name, value });
            }
        }
        for c in [self.blur, self.image_h, self.image_v, self.noise_h, self.noise_v] {
            c.validate()?;
        }
        Ok(())
    }
}

/// Blur prior: `R_w` on the padded vector and `R_ω` on the central entries.
#[derive(Debug, Clone)]
pub struct BlurPrior {
    r_w: CirculantMatrix,
    eigs: Vec<f64>,
    central: Vec<usize>,
    constrained: Vec<usize>,
    r_omega: Matrix,
    chol_omega: Cholesky,
}

impl BlurPrior {
    pub fn new(lattice: &LatticeSpec, hp: &HyperParams) -> Result<Self> {
        let n_v = lattice.n_v();
        let r_w = build_correlation(n_v, hp.blur);
        let eigs = positive_eigs(&r_w, "blur correlation")?;
        let central = lattice.blur_central();
        let constrained = lattice.blur_constrained();
        let dense = r_w.dense();
        let r_cc = dense.select(&central, &central);
        let r_omega = if constrained.is_empty() {
            r_cc
        } else {
            let r_ca = dense.select(&central, &constrained);
            let r_aa = dense.select(&constrained, &constrained);
            let chol = Cholesky::with_nugget(&r_aa, "blur constraint gram")?;
            let mut r = r_cc.sub(&r_ca.matmul(&chol.solve_matrix(&r_ca.transpose())));
            r.symmetrize();
            r
        };
        let chol_omega = Cholesky::with_nugget(&r_omega, "blur prior correlation")?;
        Ok(Self { r_w, eigs, central, constrained, r_omega, chol_omega })
    }

    pub fn k(&self) -> usize {
        self.central.len()
    }
    pub fn r_w(&self) -> &CirculantMatrix {
        &self.r_w
    }
    /// Real eigenvalues of `R_w`.
    pub fn eigs(&self) -> &[f64] {
        &self.eigs
    }
    pub fn central(&self) -> &[usize] {
        &self.central
    }
    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }
    pub fn r_omega(&self) -> &Matrix {
        &self.r_omega
    }
    pub fn chol_omega(&self) -> &Cholesky {
        &self.chol_omega
    }

    /// `R̃_w = R_w − R_w A_wᵀ (A_w R_w A_wᵀ)⁻¹ A_w R_w` (dense).
    pub fn r_tilde_dense(&self) -> Result<Matrix> {
        let dense = self.r_w.dense();
        if self.constrained.is_empty() {
            return Ok(dense);
        }
        let n = dense.rows();
        let all: Vec<usize> = (0..n).collect();
        let cross = dense.select(&all, &self.constrained);
        let chol = Cholesky::with_nugget(&dense.select(&self.constrained, &self.constrained), "blur constraint gram")?;
        let mut r = dense.sub(&cross.matmul(&chol.solve_matrix(&cross.transpose())));
        r.symmetrize();
        Ok(r)
    }

    /// Zero-padded `w*` from `ω`.
    pub fn lift(&self, omega: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.r_w.order()];
        for (&i, &v) in self.central.iter().zip(omega) {
            w[i] = v;
        }
        w
    }

    pub fn project(&self, w_star: &[f64]) -> Vec<f64> {
        self.central.iter().map(|&i| w_star[i]).collect()
    }

    /// `ωᵀ R_ω⁻¹ ω`.
    pub fn ssw(&self, omega: &[f64]) -> f64 {
        let z = self.chol_omega.solve_lower(omega);
        z.iter().map(|v| v * v).sum()
    }

    pub fn log_det_r_omega(&self) -> f64 {
        self.chol_omega.log_det()
    }

    /// `log N(ω; 0, σ_w² R_ω)`.
    pub fn log_density(&self, omega: &[f64], sigma_w2: f64) -> f64 {
        let k = self.k() as f64;
        -0.5 * (k * libm::log(2.0 * PI) + k * libm::log(sigma_w2) + self.log_det_r_omega() + self.ssw(omega) / sigma_w2)
    }

    pub fn sample_omega<R: Rng + ?Sized>(&self, sigma_w2: f64, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.k()).map(|_| rng.sample(StandardNormal)).collect();
        let s = libm::sqrt(sigma_w2);
        self.chol_omega.lower_mul(&z).into_iter().map(|v| v * s).collect()
    }
}

/// Image prior with the exact pixel constraints.
#[derive(Debug, Clone)]
pub struct ImagePrior {
    r_v: CirculantMatrix,
    r_h: CirculantMatrix,
    r_c: BccbMatrix,
    eigs: Vec<f64>,
    constraint: HardConstraint,
    gram: Option<Cholesky>,
    mu_tilde: Vec<f64>,
    product: Option<(Vec<usize>, Vec<usize>)>,
}

impl ImagePrior {
    pub fn new(lattice: &LatticeSpec, hp: &HyperParams, c_obs: &[f64]) -> Result<Self> {
        let r_v = build_correlation(lattice.n_v(), hp.image_v);
        let r_h = build_correlation(lattice.n_h(), hp.image_h);
        let r_c = BccbMatrix::from_kronecker(&r_h, &r_v);
        positive_eigs(&r_v, "image vertical correlation")?;
        positive_eigs(&r_h, "image horizontal correlation")?;
        let eigs = r_c.real_eigs();
        let selector = lattice.image_selector();
        let constraint = HardConstraint::new(selector, c_obs.to_vec(), lattice.n())?;
        let (gram, mu_tilde) = if constraint.is_empty() {
            (None, vec![0.0; lattice.n()])
        } else {
            let kriging = Kriging::new(&r_c, constraint.clone())?;
            let mut mu = vec![0.0; lattice.n()];
            kriging.apply(&r_c, &mut mu);
            let g = Cholesky::with_nugget(&crate::gauss::CovarianceAction::gram(&r_c, constraint.selector()), "image constraint gram")?;
            (Some(g), mu)
        };
        Ok(Self { r_v, r_h, r_c, eigs, constraint, gram, mu_tilde, product: lattice.image_product() })
    }

    pub fn r_v(&self) -> &CirculantMatrix {
        &self.r_v
    }
    pub fn r_h(&self) -> &CirculantMatrix {
        &self.r_h
    }
    pub fn r_c(&self) -> &BccbMatrix {
        &self.r_c
    }
    /// Real eigenvalue grid of `R_c`.
    pub fn eigs(&self) -> &[f64] {
        &self.eigs
    }
    pub fn constraint(&self) -> &HardConstraint {
        &self.constraint
    }
    pub fn m(&self) -> usize {
        self.constraint.len()
    }
    /// Cholesky factor of `A_c R_c A_cᵀ`, if there are constraints.
    pub fn gram(&self) -> Option<&Cholesky> {
        self.gram.as_ref()
    }
    /// Constrained prior mean `R_c A_cᵀ (A_c R_c A_cᵀ)⁻¹ c_o`.
    pub fn mu_tilde(&self) -> &[f64] {
        &self.mu_tilde
    }

    /// `R* x` with `R* = R_c A_cᵀ (A_c R_c A_cᵀ)⁻¹ A_c R_c`.
    pub fn apply_r_star(&self, x: &[f64]) -> Vec<f64> {
        let Some(g) = &self.gram else {
            return vec![0.0; x.len()];
        };
        let rx = self.r_c.matvec(x).expect("grid size fixed by the lattice");
        let sel = self.constraint.selector();
        let u = g.solve(&sel.iter().map(|&i| rx[i]).collect::<Vec<_>>());
        crate::gauss::CovarianceAction::apply_transpose_selection(&self.r_c, sel, &u)
    }

    /// Factors with `R* = R*_h ⊗ R*_v` for a product-shaped mask.
    pub fn kronecker_factors(&self) -> Result<(Matrix, Matrix)> {
        let (rows, cols) = self.product.clone().ok_or(Error::MaskNotKronecker)?;
        let factor = |r: &CirculantMatrix, idx: &[usize]| -> Result<Matrix> {
            let n = r.order();
            if idx.is_empty() {
                return Ok(Matrix::zeros(n, n));
            }
            let dense = r.dense();
            let all: Vec<usize> = (0..n).collect();
            let cross = dense.select(&all, idx);
            let chol = Cholesky::with_nugget(&dense.select(idx, idx), "image constraint factor")?;
            let mut out = cross.matmul(&chol.solve_matrix(&cross.transpose()));
            out.symmetrize();
            Ok(out)
        };
        Ok((factor(&self.r_h, &cols)?, factor(&self.r_v, &rows)?))
    }

    /// Dense `Σ̃_c = σ_c² (R_c − R*)`.
    pub fn sigma_tilde_dense(&self, sigma_c2: f64) -> Matrix {
        let n = self.eigs.len();
        let r = self.r_c.dense();
        let mut rstar = Matrix::zeros(n, n);
        if let Some(g) = &self.gram {
            let all: Vec<usize> = (0..n).collect();
            let cross = r.select(&all, self.constraint.selector());
            rstar = cross.matmul(&g.solve_matrix(&cross.transpose()));
        }
        let mut s = r.sub(&rstar).scale(sigma_c2);
        s.symmetrize();
        s
    }

    /// Draw from the constrained prior.
    pub fn sample<R: Rng + ?Sized>(&self, plan: &Fft2, sigma_c2: f64, rng: &mut R) -> Result<Vec<f64>> {
        let eig: Vec<f64> = self.eigs.iter().map(|l| l * sigma_c2).collect();
        let mut c = sample_stationary(plan, &eig, rng)?;
        if !self.constraint.is_empty() {
            let k = Kriging::new(&self.r_c, self.constraint.clone())?;
            k.apply(&self.r_c, &mut c);
        }
        Ok(c)
    }
}

/// Noise correlation `R_d = R_{d,h} ⊗ R_{d,v}`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    r_v: CirculantMatrix,
    r_h: CirculantMatrix,
    r_d: BccbMatrix,
    eigs: Vec<f64>,
    eigs_v: Vec<f64>,
    tau_h: Vec<(usize, f64)>,
}

/// Entries of `R_{d,h}⁻¹` below this fraction of the largest are dropped.
pub const PRECISION_SPARSITY_TOL: f64 = 1e-12;

impl NoiseModel {
    pub fn new(lattice: &LatticeSpec, hp: &HyperParams) -> Result<Self> {
        let r_v = build_correlation(lattice.n_v(), hp.noise_v);
        let r_h = build_correlation(lattice.n_h(), hp.noise_h);
        let eigs_v = positive_eigs(&r_v, "noise vertical correlation")?;
        positive_eigs(&r_h, "noise horizontal correlation")?;
        let r_d = BccbMatrix::from_kronecker(&r_h, &r_v);
        let eigs = r_d.real_eigs();
        let prec = r_h.inverse()?;
        let max = prec.base().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let tau_h = prec
            .base()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= PRECISION_SPARSITY_TOL * max)
            .map(|(i, &v)| (i, v))
            .collect();
        Ok(Self { r_v, r_h, r_d, eigs, eigs_v, tau_h })
    }

    pub fn r_v(&self) -> &CirculantMatrix {
        &self.r_v
    }
    pub fn r_h(&self) -> &CirculantMatrix {
        &self.r_h
    }
    pub fn r_d(&self) -> &BccbMatrix {
        &self.r_d
    }
    /// Real eigenvalue grid of `R_d`.
    pub fn eigs(&self) -> &[f64] {
        &self.eigs
    }
    /// Real eigenvalues of `R_{d,v}`.
    pub fn eigs_v(&self) -> &[f64] {
        &self.eigs_v
    }
    /// Retained `(lag, value)` entries of the first column of `R_{d,h}⁻¹`.
    pub fn tau_h(&self) -> &[(usize, f64)] {
        &self.tau_h
    }
}

pub fn sigma_d2(psi: f64, sigma_c2: f64, sigma_w2: f64, zeta: f64) -> f64 {
    psi * sigma_c2 * sigma_w2 * zeta
}

/// Kriging correction for the observed data window.
///
/// The window is a product of a row range and a column range, so
/// `A R_d Aᵀ = K_h ⊗ K_v` and the correction needs only the two small factors.
#[derive(Debug, Clone)]
pub struct DataKriging {
    n_v: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    chol_v: Cholesky,
    chol_h: Cholesky,
    cross_v: Matrix,
    cross_h: Matrix,
}

impl DataKriging {
    pub fn new(lattice: &LatticeSpec, noise: &NoiseModel) -> Result<Self> {
        let rows = lattice.observed_rows();
        let cols = lattice.observed_cols();
        let dv = noise.r_v().dense();
        let dh = noise.r_h().dense();
        let all_v: Vec<usize> = (0..lattice.n_v()).collect();
        let all_h: Vec<usize> = (0..lattice.n_h()).collect();
        let chol_v = Cholesky::with_nugget(&dv.select(&rows, &rows), "data row gram")?;
        let chol_h = Cholesky::with_nugget(&dh.select(&cols, &cols), "data column gram")?;
        Ok(Self {
            n_v: lattice.n_v(),
            cross_v: dv.select(&all_v, &rows),
            cross_h: dh.select(&all_h, &cols),
            rows,
            cols,
            chol_v,
            chol_h,
        })
    }

    /// Correct `x` in place so that its observed window equals `d_obs`.
    pub fn apply(&self, x: &mut [f64], d_obs: &[f64]) {
        let (nr, nc) = (self.rows.len(), self.cols.len());
        let n_h = x.len() / self.n_v;
        if nr == self.n_v && nc == n_h {
            x.copy_from_slice(d_obs);
            return;
        }
        // residual window, then K_v⁻¹ M K_h⁻¹
        let mut m = Matrix::from_fn(nr, nc, |i, j| x[self.rows[i] + self.n_v * self.cols[j]] - d_obs[i + nr * j]);
        m = self.chol_v.solve_matrix(&m);
        m = self.chol_h.solve_matrix(&m.transpose()).transpose();
        let corr = self.cross_v.matmul(&m).matmul(&self.cross_h.transpose());
        for (xi, c) in x.iter_mut().zip(corr.as_slice()) {
            *xi -= c;
        }
        for j in 0..nc {
            for i in 0..nr {
                x[self.rows[i] + self.n_v * self.cols[j]] = d_obs[i + nr * j];
            }
        }
    }
}

/// Fully assembled model with observations.
#[derive(Debug, Clone)]
pub struct SbdModel {
    lattice: LatticeSpec,
    hp: HyperParams,
    blur: BlurPrior,
    image: ImagePrior,
    noise: NoiseModel,
    d_obs: Vec<f64>,
    data_selector: Vec<usize>,
    data_kriging: DataKriging,
    plan2: Fft2,
    plan_v: Fft,
}

impl SbdModel {
    /// `d_obs` is the observed window (column-major `n_v^o x n_h^o`);
    /// `c_obs` holds the exact pixels in the order of
    /// [`LatticeSpec::image_selector`].
    pub fn new(lattice: LatticeSpec, hp: HyperParams, d_obs: Vec<f64>, c_obs: Vec<f64>) -> Result<Self> {
        hp.validate()?;
        if d_obs.len() != lattice.n_obs() {
            return Err(Error::DimensionMismatch { expected: lattice.n_obs(), got: d_obs.len() });
        }
        let m = lattice.image_selector().len();
        if c_obs.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: c_obs.len() });
        }
        let blur = BlurPrior::new(&lattice, &hp)?;
        let image = ImagePrior::new(&lattice, &hp, &c_obs)?;
        let noise = NoiseModel::new(&lattice, &hp)?;
        let data_kriging = DataKriging::new(&lattice, &noise)?;
        let plan2 = Fft2::new(lattice.n_v(), lattice.n_h());
        let plan_v = Fft::new(lattice.n_v());
        let data_selector = lattice.data_selector();
        Ok(Self { lattice, hp, blur, image, noise, d_obs, data_selector, data_kriging, plan2, plan_v })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }
    pub fn hyper(&self) -> &HyperParams {
        &self.hp
    }
    pub fn blur(&self) -> &BlurPrior {
        &self.blur
    }
    pub fn image(&self) -> &ImagePrior {
        &self.image
    }
    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    pub fn d_obs(&self) -> &[f64] {
        &self.d_obs
    }
    pub fn data_selector(&self) -> &[usize] {
        &self.data_selector
    }
    pub fn data_kriging(&self) -> &DataKriging {
        &self.data_kriging
    }
    pub fn plan2(&self) -> &Fft2 {
        &self.plan2
    }
    pub fn plan_v(&self) -> &Fft {
        &self.plan_v
    }
    pub fn n(&self) -> usize {
        self.lattice.n()
    }
    pub fn k(&self) -> usize {
        self.lattice.k()
    }

    /// Eigenvalues of `W₀` for a padded blur.
    pub fn w_eigs(&self, w_star: &[f64]) -> Result<Vec<C64>> {
        shifted_eigs(&self.plan_v, w_star)
    }

    /// `W c` on the lattice.
    pub fn convolve(&self, w_eigs: &[C64], c: &[f64]) -> Vec<f64> {
        crate::convolution::convolve_columns(&self.plan_v, w_eigs, c)
    }

    /// Swap in new observations, keeping all structure.
    pub fn with_observations(&self, d_obs: Vec<f64>, c_obs: Vec<f64>) -> Result<Self> {
        Self::new(self.lattice.clone(), self.hp, d_obs, c_obs)
    }
}

/// Current values of all unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub omega: Vec<f64>,
    pub w_star: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    pub zeta: f64,
}

impl ModelState {
    /// State with the data window filled from the observations and zero padding.
    pub fn new(model: &SbdModel, omega: Vec<f64>, c: Vec<f64>, sigma_c2: f64, sigma_w2: f64, zeta: f64) -> Result<Self> {
        if omega.len() != model.k() {
            return Err(Error::DimensionMismatch { expected: model.k(), got: omega.len() });
        }
        if c.len() != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), got: c.len() });
        }
        let mut d = vec![0.0; model.n()];
        for (&i, &v) in model.data_selector().iter().zip(model.d_obs()) {
            d[i] = v;
        }
        let w_star = model.blur().lift(&omega);
        Ok(Self { omega, w_star, c, d, sigma_c2, sigma_w2, zeta })
    }

    /// Draw every unknown from its prior, then the padding of `d` from the
    /// data model conditioned on the observed window.
    pub fn from_prior<R: Rng + ?Sized>(model: &SbdModel, rng: &mut R) -> Result<Self> {
        let hp = model.hyper();
        let sigma_c2 = sample_inv_gamma(hp.alpha_c, hp.beta_c, rng)?;
        let sigma_w2 = sample_inv_gamma(hp.alpha_w, hp.beta_w, rng)?;
        let zeta = sample_inv_gamma(hp.alpha_zeta, hp.beta_zeta, rng)?;
        let omega = model.blur().sample_omega(sigma_w2, rng);
        let c = model.image().sample(model.plan2(), sigma_c2, rng)?;
        let mut state = Self::new(model, omega, c, sigma_c2, sigma_w2, zeta)?;
        state.d = crate::gibbs::sample_aux_data_fc(&state, model, rng)?;
        Ok(state)
    }

    pub fn sigma_d2(&self, psi: f64) -> f64 {
        sigma_d2(psi, self.sigma_c2, self.sigma_w2, self.zeta)
    }

    pub fn set_omega(&mut self, model: &SbdModel, omega: Vec<f64>) {
        self.w_star = model.blur().lift(&omega);
        self.omega = omega;
    }

    /// Image values at the pixels that are not exactly observed.
    pub fn c_u(&self, model: &SbdModel) -> Vec<f64> {
        complement(model.image().constraint().selector(), model.n()).into_iter().map(|i| self.c[i]).collect()
    }

    /// Data values outside the observed window.
    pub fn d_u(&self, model: &SbdModel) -> Vec<f64> {
        complement(model.data_selector(), model.n()).into_iter().map(|i| self.d[i]).collect()
    }

    pub fn check_variances(&self) -> Result<()> {
        for (name, value) in [("sigma_c2", self.sigma_c2), ("sigma_w2", self.sigma_w2), ("zeta", self.zeta)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveVariance { name, value });
            }
        }
        Ok(())
    }
}

/// `(d − W c)ᵀ R_d⁻¹ (d − W c)` via the Fourier domain.
pub fn ssd(model: &SbdModel, w_star: &[f64], c: &[f64], d: &[f64]) -> Result<f64> {
    let lam_w = model.w_eigs(w_star)?;
    let plan = model.plan2();
    let c_hat = plan.forward_real(c);
    let d_hat = plan.forward_real(d);
    let n_v = model.lattice().n_v();
    Ok(d_hat
        .iter()
        .zip(&c_hat)
        .zip(model.noise().eigs())
        .enumerate()
        .map(|(idx, ((dh, ch), l))| (dh - lam_w[idx % n_v] * ch).norm_sqr() / l)
        .sum())
}

/// `cᵀ R_c⁻¹ c` via the Fourier domain.
pub fn ssc(model: &SbdModel, c: &[f64]) -> f64 {
    let c_hat = model.plan2().forward_real(c);
    c_hat.iter().zip(model.image().eigs()).map(|(z, l)| z.norm_sqr() / l).sum()
}

/// `ωᵀ R_ω⁻¹ ω`.
pub fn ssw(model: &SbdModel, omega: &[f64]) -> f64 {
    model.blur().ssw(omega)
}

/// Unnormalised log posterior: data likelihood on the whole lattice, the
/// priors of `ω` and of the full image, and the three inverse-gamma priors.
pub fn log_posterior_unnorm(state: &ModelState, model: &SbdModel) -> Result<f64> {
    state.check_variances()?;
    let n = model.n() as f64;
    let hp = model.hyper();
    let sd2 = state.sigma_d2(hp.psi);
    let ln2pi = libm::log(2.0 * PI);
    let log_det_rd: f64 = model.noise().eigs().iter().map(|l| libm::log(*l)).sum();
    let log_det_rc: f64 = model.image().eigs().iter().map(|l| libm::log(*l)).sum();
    let lik = -0.5 * (n * ln2pi + n * libm::log(sd2) + log_det_rd + ssd(model, &state.w_star, &state.c, &state.d)? / sd2);
    let prior_w = model.blur().log_density(&state.omega, state.sigma_w2);
    let prior_c = -0.5 * (n * ln2pi + n * libm::log(state.sigma_c2) + log_det_rc + ssc(model, &state.c) / state.sigma_c2);
    let ig = inv_gamma_logpdf(state.sigma_c2, hp.alpha_c, hp.beta_c)
        + inv_gamma_logpdf(state.sigma_w2, hp.alpha_w, hp.beta_w)
        + inv_gamma_logpdf(state.zeta, hp.alpha_zeta, hp.beta_zeta);
    Ok(lik + prior_w + prior_c + ig)
}
