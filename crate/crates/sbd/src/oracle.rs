//! Dense reference computations.
//!
//! Every matrix here is assembled entry by entry from its definition, with no
//! use of the Fourier or Kriging machinery, so it can check the structured
//! code paths. Cost is cubic in the lattice size; lattices above
//! [`MAX_DIM`] cells are refused.

use nalgebra::{DMatrix, DVector};

use sbd_core::model::{CorrelationSpec, ModelState, SbdModel};

/// Largest lattice the dense routines accept.
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("dense reference refuses dimension {n} (limit {MAX_DIM})")]
    TooLarge { n: usize },
    #[error("dense matrix `{0}` is not positive definite")]
    IndefiniteDense(&'static str),
    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    BadStep(f64),
}

pub type OracleResult<T> = std::result::Result<T, OracleError>;

fn guard(n: usize) -> OracleResult<()> {
    if n > MAX_DIM {
        Err(OracleError::TooLarge { n })
    } else {
        Ok(())
    }
}

/// Cyclic correlation matrix with great-circle lag.
pub fn dense_correlation(n: usize, spec: CorrelationSpec) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        let h = d.min(n - d) as f64;
        (-(h / spec.phi).powf(spec.p)).exp()
    })
}

/// `(R_h ⊗ R_v)` for column-major lattice vectors.
pub fn kron(h: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    h.kronecker(v)
}

/// Gaussian conditioning on `x[selector] = b`, evaluated literally.
pub fn dense_conditional(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    selector: &[usize],
    b: &DVector<f64>,
) -> OracleResult<(DVector<f64>, DMatrix<f64>)> {
    guard(mu.len())?;
    if selector.is_empty() {
        return Ok((mu.clone(), sigma.clone()));
    }
    let n = mu.len();
    let cross = DMatrix::from_fn(n, selector.len(), |i, j| sigma[(i, selector[j])]);
    let gram = DMatrix::from_fn(selector.len(), selector.len(), |i, j| sigma[(selector[i], selector[j])]);
    let resid = DVector::from_fn(selector.len(), |i, _| b[i] - mu[selector[i]]);
    let chol = gram.cholesky().ok_or(OracleError::IndefiniteDense("conditioning gram"))?;
    let mean = mu + &cross * chol.solve(&resid);
    let mut cov = sigma - &cross * chol.solve(&cross.transpose());
    cov = (&cov + cov.transpose()) * 0.5;
    Ok((mean, cov))
}

/// `W₀` for a padded blur: `W₀[i, j] = w*[(i − j + n_v/2) mod n_v]`.
pub fn dense_w0(w_star: &[f64]) -> DMatrix<f64> {
    let n = w_star.len();
    DMatrix::from_fn(n, n, |i, j| w_star[(i + n + n / 2 - j) % n])
}

/// `Γ` with `W c = Γ w*`: stacked `Γ_j[i, l] = c_j[(i − l + n_v/2) mod n_v]`.
pub fn dense_gamma(c: &[f64], n_v: usize) -> DMatrix<f64> {
    let n = c.len();
    DMatrix::from_fn(n, n_v, |r, l| {
        let (i, j) = (r % n_v, r / n_v);
        c[j * n_v + (i + n_v + n_v / 2 - l) % n_v]
    })
}

/// Explicit matrices of the model at one `ω` and variance triple.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub n_v: usize,
    pub n_h: usize,
    pub w_star: DVector<f64>,
    pub w: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    /// Selection of the observed data window.
    pub b: DMatrix<f64>,
    pub r_w: DMatrix<f64>,
    pub r_omega: DMatrix<f64>,
    pub r_tilde_w: DMatrix<f64>,
    pub r_c: DMatrix<f64>,
    pub r_d: DMatrix<f64>,
    pub sigma_c: DMatrix<f64>,
    pub sigma_tilde_c: DMatrix<f64>,
    pub mu_tilde_c: DVector<f64>,
    pub sigma_d: DMatrix<f64>,
    pub sigma_d_given_w: DMatrix<f64>,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    pub sigma_d2: f64,
    central: Vec<usize>,
    image_sel: Vec<usize>,
    image_vals: Vec<f64>,
}

impl DenseModel {
    /// Assemble at blur `ω` with the variances and image of `state`.
    pub fn build(model: &SbdModel, state: &ModelState, omega: &[f64]) -> OracleResult<Self> {
        let lat = model.lattice();
        let (n_v, n_h) = (lat.n_v(), lat.n_h());
        let n = n_v * n_h;
        guard(n)?;
        let hp = model.hyper();
        let central = lat.blur_central();
        let mut w_star = vec![0.0; n_v];
        for (&i, &v) in central.iter().zip(omega) {
            w_star[i] = v;
        }
        let w = DMatrix::<f64>::identity(n_h, n_h).kronecker(&dense_w0(&w_star));
        let gamma = dense_gamma(&state.c, n_v);
        let sel = lat.data_selector();
        let b = DMatrix::from_fn(sel.len(), n, |i, j| if sel[i] == j { 1.0 } else { 0.0 });

        let r_w = dense_correlation(n_v, hp.blur);
        let outside: Vec<usize> = (0..n_v).filter(|i| !central.contains(i)).collect();
        let (_, r_tilde_w) =
            dense_conditional(&DVector::zeros(n_v), &r_w, &outside, &DVector::zeros(outside.len()))?;
        let r_omega = DMatrix::from_fn(central.len(), central.len(), |i, j| r_tilde_w[(central[i], central[j])]);

        let r_c = kron(&dense_correlation(n_h, hp.image_h), &dense_correlation(n_v, hp.image_v));
        let r_d = kron(&dense_correlation(n_h, hp.noise_h), &dense_correlation(n_v, hp.noise_v));
        let sigma_c = &r_c * state.sigma_c2;
        let image_sel = lat.image_selector();
        let image_vals = model.image().constraint().values().to_vec();
        let (mu_tilde_c, sigma_tilde_c) =
            dense_conditional(&DVector::zeros(n), &sigma_c, &image_sel, &DVector::from_column_slice(&image_vals))?;
        let sigma_d2 = state.sigma_d2(hp.psi);
        let sigma_d = &r_d * sigma_d2;
        let mut sigma_d_given_w = &w * &sigma_tilde_c * w.transpose() + &sigma_d;
        sigma_d_given_w = (&sigma_d_given_w + sigma_d_given_w.transpose()) * 0.5;
        Ok(Self {
            n_v,
            n_h,
            w_star: DVector::from_vec(w_star),
            w,
            gamma,
            b,
            r_w,
            r_omega,
            r_tilde_w,
            r_c,
            r_d,
            sigma_c,
            sigma_tilde_c,
            mu_tilde_c,
            sigma_d,
            sigma_d_given_w,
            sigma_c2: state.sigma_c2,
            sigma_w2: state.sigma_w2,
            sigma_d2,
            central,
            image_sel,
            image_vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n_v * self.n_h
    }

    /// Blur conditional from the joint of `(w*, d)` given the current image.
    /// With `zero_outside`, the entries outside the support are also fixed.
    pub fn blur_conditional(&self, d: &[f64], zero_outside: bool) -> OracleResult<(DVector<f64>, DMatrix<f64>)> {
        let (n_v, n) = (self.n_v, self.n());
        let prior = &self.r_w * self.sigma_w2;
        let cross = &prior * self.gamma.transpose();
        let dd = &self.gamma * &cross + &self.sigma_d;
        let mut joint = DMatrix::zeros(n_v + n, n_v + n);
        joint.view_mut((0, 0), (n_v, n_v)).copy_from(&prior);
        joint.view_mut((0, n_v), (n_v, n)).copy_from(&cross);
        joint.view_mut((n_v, 0), (n, n_v)).copy_from(&cross.transpose());
        joint.view_mut((n_v, n_v), (n, n)).copy_from(&dd);
        let mut sel: Vec<usize> = (n_v..n_v + n).collect();
        let mut vals = d.to_vec();
        if zero_outside {
            for i in (0..n_v).filter(|i| !self.central.contains(i)) {
                sel.push(i);
                vals.push(0.0);
            }
        }
        let (mu, cov) = dense_conditional(&DVector::zeros(n_v + n), &joint, &sel, &DVector::from_vec(vals))?;
        Ok((mu.rows(0, n_v).into_owned(), cov.view((0, 0), (n_v, n_v)).into_owned()))
    }

    /// Image conditional from the joint of `(c, d)` given the current blur.
    /// With `exact_pixels`, the observed pixels are also fixed.
    pub fn image_conditional(&self, d: &[f64], exact_pixels: bool) -> OracleResult<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n();
        let cross = &self.sigma_c * self.w.transpose();
        let dd = &self.w * &cross + &self.sigma_d;
        let mut joint = DMatrix::zeros(2 * n, 2 * n);
        joint.view_mut((0, 0), (n, n)).copy_from(&self.sigma_c);
        joint.view_mut((0, n), (n, n)).copy_from(&cross);
        joint.view_mut((n, 0), (n, n)).copy_from(&cross.transpose());
        joint.view_mut((n, n), (n, n)).copy_from(&dd);
        let mut sel: Vec<usize> = (n..2 * n).collect();
        let mut vals = d.to_vec();
        if exact_pixels {
            sel.extend_from_slice(&self.image_sel);
            vals.extend_from_slice(&self.image_vals);
        }
        let (mu, cov) = dense_conditional(&DVector::zeros(2 * n), &joint, &sel, &DVector::from_vec(vals))?;
        Ok((mu.rows(0, n).into_owned(), cov.view((0, 0), (n, n)).into_owned()))
    }

    /// Conditional of the whole data lattice given `c`, `w*` and the window.
    pub fn aux_data_conditional(&self, c: &[f64], d_obs: &[f64]) -> OracleResult<(DVector<f64>, DMatrix<f64>)> {
        let mean = &self.w * DVector::from_column_slice(c);
        let sel: Vec<usize> = (0..self.b.nrows())
            .map(|i| (0..self.n()).find(|&j| self.b[(i, j)] == 1.0).expect("one entry per row"))
            .collect();
        dense_conditional(&mean, &self.sigma_d, &sel, &DVector::from_column_slice(d_obs))
    }

    /// `log |Σ_{d|ω}|` from a Cholesky factor.
    pub fn logdet(&self) -> OracleResult<f64> {
        let chol = self.sigma_d_given_w.clone().cholesky().ok_or(OracleError::IndefiniteDense("Σ_{d|ω}"))?;
        Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
    }

    /// `(d − W μ̃_c)ᵀ Σ_{d|ω}⁻¹ (d − W μ̃_c)`.
    pub fn quadform(&self, d: &[f64]) -> OracleResult<f64> {
        let r = DVector::from_column_slice(d) - &self.w * &self.mu_tilde_c;
        let chol = self.sigma_d_given_w.clone().cholesky().ok_or(OracleError::IndefiniteDense("Σ_{d|ω}"))?;
        Ok(r.dot(&chol.solve(&r)))
    }

    /// Negative log density of `ω` under its prior plus the marginal
    /// likelihood of the full data lattice.
    pub fn marginal_potential(&self, omega: &[f64], d: &[f64]) -> OracleResult<f64> {
        let k = omega.len() as f64;
        let n = self.n() as f64;
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let chol_o = self.r_omega.clone().cholesky().ok_or(OracleError::IndefiniteDense("R_ω"))?;
        let om = DVector::from_column_slice(omega);
        let log_det_o = 2.0 * chol_o.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let prior = 0.5 * (k * ln2pi + k * self.sigma_w2.ln() + log_det_o + om.dot(&chol_o.solve(&om)) / self.sigma_w2);
        Ok(prior + 0.5 * (n * ln2pi + self.logdet()? + self.quadform(d)?))
    }
}

/// Dense marginal potential at `ω`, rebuilding every matrix.
pub fn dense_marginal_potential(model: &SbdModel, state: &ModelState, omega: &[f64]) -> OracleResult<f64> {
    DenseModel::build(model, state, omega)?.marginal_potential(omega, &state.d)
}

/// Central finite-difference gradient.
pub fn fd_gradient<F>(mut f: F, x: &[f64], h: f64) -> OracleResult<Vec<f64>>
where
    F: FnMut(&[f64]) -> OracleResult<f64>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(OracleError::BadStep(h));
    }
    let mut y = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f(&y)?;
        y[i] = x[i] - h;
        let fm = f(&y)?;
        y[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Convert a core column-major matrix to nalgebra.
pub fn to_dmatrix(m: &sbd_core::linalg::Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}
