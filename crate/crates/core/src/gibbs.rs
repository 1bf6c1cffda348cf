//! Gibbs updates over the six full conditionals.
//!
//! Every Gaussian conditional is formed on the eigenvalues, sampled in the
//! Fourier domain and then corrected by Kriging onto its hard constraints.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::circulant::{BccbMatrix, CirculantMatrix};
use crate::convolution::column_shifted_eigs;
use crate::gauss::{sample_stationary, FourierGaussian, HardConstraint, Kriging};
use crate::hmc::{hmc_update, HmcConfig, HmcOutcome, HmcState};
use crate::model::{ModelState, SbdModel};
use crate::rng::ChainRng;
use crate::special::sample_inv_gamma;
use crate::{Error, Result};

pub use crate::model::{ssc, ssd, ssw};

/// Fourier-domain parameters of the unconstrained blur conditional.
#[derive(Debug, Clone)]
pub struct BlurConditional {
    /// Eigenvalues of `Σ_{w|d}`.
    pub eig_cov: Vec<f64>,
    /// DFT of `μ_{w|d}`.
    pub mean_hat: Vec<C64>,
    /// Eigenvalues of `Γᵀ R_d⁻¹ Γ`.
    pub gamma_prec: Vec<f64>,
}

impl BlurConditional {
    pub fn mean(&self, model: &SbdModel) -> Vec<f64> {
        crate::fft::real_part(&model.plan_v().inverse(&self.mean_hat))
    }

    pub fn covariance(&self) -> CirculantMatrix {
        CirculantMatrix::from_eigs(self.eig_cov.iter().map(|&l| C64::new(l, 0.0)).collect())
    }
}

/// Eigenvalues of `Γᵀ R_d⁻¹ Γ` from the per-column spectra of `Γ_j` and the
/// retained entries of `R_{d,h}⁻¹`.
pub fn gamma_precision_eigs(model: &SbdModel, gamma_eigs: &[C64]) -> Vec<f64> {
    let n_v = model.lattice().n_v();
    let n_h = model.lattice().n_h();
    let lam_dv = model.noise().eigs_v();
    let mut acc = vec![0.0; n_v];
    for i in 0..n_h {
        let gi = &gamma_eigs[i * n_v..(i + 1) * n_v];
        for &(delta, tau) in model.noise().tau_h() {
            let j = (i + delta) % n_h;
            let gj = &gamma_eigs[j * n_v..(j + 1) * n_v];
            for f in 0..n_v {
                acc[f] += tau * (gi[f].conj() * gj[f]).re;
            }
        }
    }
    for (a, l) in acc.iter_mut().zip(lam_dv) {
        *a /= l;
    }
    acc
}

/// Parameters of `w* | c, d, σ²` before the zero constraints.
pub fn blur_fc_params(state: &ModelState, model: &SbdModel) -> Result<BlurConditional> {
    state.check_variances()?;
    let n_v = model.lattice().n_v();
    let n_h = model.lattice().n_h();
    let sd2 = state.sigma_d2(model.hyper().psi);
    let gamma = column_shifted_eigs(model.plan_v(), &state.c, n_v)?;
    let g = gamma_precision_eigs(model, &gamma);
    let eig_cov: Vec<f64> = model
        .blur()
        .eigs()
        .iter()
        .zip(&g)
        .map(|(&lw, &gf)| 1.0 / (1.0 / (state.sigma_w2 * lw) + gf / sd2))
        .collect();
    // R_d⁻¹ d, column spectra
    let mut y = model.plan2().forward_real(&state.d);
    for (z, l) in y.iter_mut().zip(model.noise().eigs()) {
        *z /= l;
    }
    model.plan2().rows_in_place(&mut y, true);
    let mut mean_hat = vec![C64::new(0.0, 0.0); n_v];
    for j in 0..n_h {
        for f in 0..n_v {
            mean_hat[f] += gamma[j * n_v + f].conj() * y[j * n_v + f];
        }
    }
    for (m, &s) in mean_hat.iter_mut().zip(&eig_cov) {
        *m *= s / sd2;
    }
    Ok(BlurConditional { eig_cov, mean_hat, gamma_prec: g })
}

/// Draw `w*` (and hence `ω`) from its full conditional.
pub fn sample_blur_fc<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Result<Vec<f64>> {
    let p = blur_fc_params(state, model)?;
    let n_v = model.lattice().n_v();
    let g = FourierGaussian::new(n_v, 1, p.mean_hat.clone(), p.eig_cov.clone())?;
    let plan = crate::fft::Fft2::new(n_v, 1);
    let mut w = g.sample(&plan, rng);
    let cov = p.covariance();
    let constraint = HardConstraint::new(model.blur().constrained().to_vec(), vec![0.0; model.blur().constrained().len()], n_v)?;
    let k = Kriging::new(&cov, constraint).map_err(|_| Error::IllConditioned("blur conditional constraint gram"))?;
    k.apply(&cov, &mut w);
    Ok(w)
}

/// Fourier-domain parameters of the unconstrained image conditional.
#[derive(Debug, Clone)]
pub struct ImageConditional {
    pub eig_cov: Vec<f64>,
    pub mean_hat: Vec<C64>,
}

impl ImageConditional {
    pub fn mean(&self, model: &SbdModel) -> Vec<f64> {
        model.plan2().inverse_real(&self.mean_hat)
    }

    pub fn covariance(&self, model: &SbdModel) -> Result<BccbMatrix> {
        let l = model.lattice();
        BccbMatrix::from_eigs(l.n_v(), l.n_h(), self.eig_cov.iter().map(|&v| C64::new(v, 0.0)).collect())
    }
}

/// Parameters of `c | w*, d, σ²` before the pixel constraints.
pub fn image_fc_params(state: &ModelState, model: &SbdModel) -> Result<ImageConditional> {
    state.check_variances()?;
    let n_v = model.lattice().n_v();
    let sd2 = state.sigma_d2(model.hyper().psi);
    let lam_w = model.w_eigs(&state.w_star)?;
    let d_hat = model.plan2().forward_real(&state.d);
    let mut eig_cov = Vec::with_capacity(model.n());
    let mut mean_hat = Vec::with_capacity(model.n());
    for (idx, ((dh, &lc), &ld)) in d_hat.iter().zip(model.image().eigs()).zip(model.noise().eigs()).enumerate() {
        let lw = lam_w[idx % n_v];
        let sc = state.sigma_c2 * lc;
        let sd = sd2 * ld;
        let denom = lw.norm_sqr() * sc + sd;
        mean_hat.push(lw.conj() * dh * (sc / denom));
        eig_cov.push(sc * sd / denom);
    }
    Ok(ImageConditional { eig_cov, mean_hat })
}

/// Draw the image from its full conditional, exact pixels included.
pub fn sample_image_fc<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Result<Vec<f64>> {
    let p = image_fc_params(state, model)?;
    let l = model.lattice();
    let g = FourierGaussian::new(l.n_v(), l.n_h(), p.mean_hat.clone(), p.eig_cov.clone())?;
    let mut c = g.sample(model.plan2(), rng);
    let constraint = model.image().constraint();
    if !constraint.is_empty() {
        let cov = p.covariance(model)?;
        let k = Kriging::new(&cov, constraint.clone()).map_err(|_| Error::IllConditioned("image conditional constraint gram"))?;
        k.apply(&cov, &mut c);
    }
    Ok(c)
}

/// Refresh the padding of `d` given the current blur and image.
pub fn sample_aux_data_fc<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Result<Vec<f64>> {
    state.check_variances()?;
    let sd2 = state.sigma_d2(model.hyper().psi);
    let lam_w = model.w_eigs(&state.w_star)?;
    let mean = model.convolve(&lam_w, &state.c);
    let eig: Vec<f64> = model.noise().eigs().iter().map(|l| l * sd2).collect();
    let mut d = sample_stationary(model.plan2(), &eig, rng)?;
    for (a, m) in d.iter_mut().zip(&mean) {
        *a += m;
    }
    model.data_kriging().apply(&mut d, model.d_obs());
    Ok(d)
}

/// Shape and scale of an inverse-gamma full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

fn ssd_state(state: &ModelState, model: &SbdModel) -> Result<f64> {
    ssd(model, &state.w_star, &state.c, &state.d)
}

pub fn sigma_w_params(state: &ModelState, model: &SbdModel) -> Result<InvGammaParams> {
    let hp = model.hyper();
    let n = model.n() as f64;
    let k = model.k() as f64;
    let ssd = ssd_state(state, model)?;
    let ssw = ssw(model, &state.omega);
    Ok(InvGammaParams {
        shape: hp.alpha_w + 0.5 * (n + k),
        scale: hp.beta_w + 0.5 * (ssd / (hp.psi * state.sigma_c2 * state.zeta) + ssw),
    })
}

pub fn sigma_c_params(state: &ModelState, model: &SbdModel) -> Result<InvGammaParams> {
    let hp = model.hyper();
    let n = model.n() as f64;
    let ssd = ssd_state(state, model)?;
    let ssc = ssc(model, &state.c);
    Ok(InvGammaParams {
        shape: hp.alpha_c + n,
        scale: hp.beta_c + ssd / (2.0 * hp.psi * state.sigma_w2 * state.zeta) + 0.5 * ssc,
    })
}

pub fn zeta_params(state: &ModelState, model: &SbdModel) -> Result<InvGammaParams> {
    let hp = model.hyper();
    let n = model.n() as f64;
    let ssd = ssd_state(state, model)?;
    Ok(InvGammaParams {
        shape: hp.alpha_zeta + 0.5 * n,
        scale: hp.beta_zeta + ssd / (2.0 * hp.psi * state.sigma_c2 * state.sigma_w2),
    })
}

pub fn sample_sigma_w<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Result<f64> {
    let p = sigma_w_params(state, model)?;
    sample_inv_gamma(p.shape, p.scale, rng)
}

pub fn sample_sigma_c<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Result<f64> {
    let p = sigma_c_params(state, model)?;
    sample_inv_gamma(p.shape, p.scale, rng)
}

pub fn sample_zeta<R: Rng + ?Sized>(state: &ModelState, model: &SbdModel, rng: &mut R) -> Result<f64> {
    let p = zeta_params(state, model)?;
    sample_inv_gamma(p.shape, p.scale, rng)
}

/// Which rule updated the blur in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlurUpdate {
    Gibbs,
    Hmc(HmcOutcome),
}

/// Counters kept across sweeps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepCounters {
    pub gibbs_blur: u64,
    pub hmc_blur: u64,
    pub hmc_accepted: u64,
    pub sweeps: u64,
}

/// One sweep: blur (HMC with probability `alpha`,
/// otherwise its full conditional), image, auxiliary data, `σ_c²`, `σ_w²`, `ζ`.
pub fn gibbs_sweep(
    state: &mut ModelState,
    model: &SbdModel,
    rng: &mut ChainRng,
    alpha: f64,
    hmc_cfg: &HmcConfig,
    hmc_state: &mut HmcState,
    counters: &mut SweepCounters,
) -> Result<BlurUpdate> {
    let use_hmc = if alpha >= 1.0 {
        true
    } else if alpha <= 0.0 {
        false
    } else {
        rng.scan.random::<f64>() < alpha
    };
    let update = if use_hmc {
        let out = hmc_update(state, model, hmc_cfg, hmc_state, &mut rng.hmc)?;
        counters.hmc_blur += 1;
        if out.accepted {
            counters.hmc_accepted += 1;
        }
        BlurUpdate::Hmc(out)
    } else {
        let w = sample_blur_fc(state, model, &mut rng.blur)?;
        let omega = model.blur().project(&w);
        state.set_omega(model, omega);
        counters.gibbs_blur += 1;
        BlurUpdate::Gibbs
    };
    state.c = sample_image_fc(state, model, &mut rng.image)?;
    state.d = sample_aux_data_fc(state, model, &mut rng.data)?;
    state.sigma_c2 = sample_sigma_c(state, model, &mut rng.sigma_c)?;
    state.sigma_w2 = sample_sigma_w(state, model, &mut rng.sigma_w)?;
    state.zeta = sample_zeta(state, model, &mut rng.zeta)?;
    counters.sweeps += 1;
    Ok(update)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CorrelationSpec, HyperParams, ImageMask, LatticeSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk(mask: ImageMask, m_v: usize, m_h: usize) -> (SbdModel, ModelState) {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let hp = HyperParams { blur: CorrelationSpec { phi: 1.5, p: 1.0 }, ..HyperParams::default() };
        let l = LatticeSpec::new(8, 3, m_v, m_h, 4, mask).unwrap();
        let m = l.image_selector().len();
        let d: Vec<f64> = (0..l.n_obs()).map(|_| rng.random::<f64>() - 0.5).collect();
        let c_obs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let model = SbdModel::new(l, hp, d, c_obs).unwrap();
        let mut s = ModelState::from_prior(&model, &mut rng).unwrap();
        s.sigma_c2 = 0.5;
        s.sigma_w2 = 1.2;
        s.zeta = 0.3;
        (model, s)
    }

    #[test]
    fn blur_draws_vanish_outside_support() {
        let (model, s) = desk(ImageMask::None, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w = sample_blur_fc(&s, &model, &mut rng).unwrap();
            for &i in model.blur().constrained() {
                assert!(w[i].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_blur_mean() {
        let (model, mut s) = desk(ImageMask::None, 0, 0);
        s.d = vec![0.0; model.n()];
        let p = blur_fc_params(&s, &model).unwrap();
        assert!(p.mean_hat.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn image_draws_hit_exact_pixels() {
        let (model, s) = desk(ImageMask::Product { rows: vec![2, 3], cols: vec![1] }, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let c = sample_image_fc(&s, &model, &mut rng).unwrap();
            assert!(model.image().constraint().max_violation(&c) < 1e-10);
        }
    }

    #[test]
    fn aux_data_without_padding_is_observed() {
        let (model, s) = desk(ImageMask::None, 0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = sample_aux_data_fc(&s, &model, &mut rng).unwrap();
        assert_eq!(d, model.d_obs());
        let (model, s) = desk(ImageMask::None, 2, 1);
        let d = sample_aux_data_fc(&s, &model, &mut rng).unwrap();
        for (&i, &v) in model.data_selector().iter().zip(model.d_obs()) {
            assert!((d[i] - v).abs() < 1e-10);
        }
    }

    #[test]
    fn ig_shapes() {
        let hp = HyperParams { blur: CorrelationSpec { phi: 1.5, p: 1.0 }, ..HyperParams::default() };
        let l = LatticeSpec::new(24, 1, 0, 0, 10, ImageMask::None).unwrap();
        let model = SbdModel::new(l, hp, vec![0.0; 24], vec![]).unwrap();
        let s = ModelState::new(&model, vec![0.1; 10], vec![0.0; 24], 1.0, 1.0, 1.0).unwrap();
        let p = sigma_w_params(&s, &model).unwrap();
        assert!((p.shape - 19.01).abs() < 1e-12);
        // d = W c exactly: only the prior sum of squares remains
        assert!((p.scale - (hp.beta_w + 0.5 * model.blur().ssw(&s.omega))).abs() < 1e-12);
    }

    #[test]
    fn sweep_respects_alpha_extremes() {
        let (model, mut s) = desk(ImageMask::None, 2, 1);
        let mut rng = ChainRng::new(4);
        let cfg = HmcConfig::new(5, 0.05).unwrap();
        let mut hs = HmcState::new(&cfg);
        let mut counters = SweepCounters::default();
        for _ in 0..5 {
            gibbs_sweep(&mut s, &model, &mut rng, 0.0, &cfg, &mut hs, &mut counters).unwrap();
        }
        assert_eq!((counters.gibbs_blur, counters.hmc_blur), (5, 0));
        for _ in 0..5 {
            gibbs_sweep(&mut s, &model, &mut rng, 1.0, &cfg, &mut hs, &mut counters).unwrap();
        }
        assert_eq!((counters.gibbs_blur, counters.hmc_blur), (5, 5));
    }
}
