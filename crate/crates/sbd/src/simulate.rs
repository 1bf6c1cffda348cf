//! Synthetic datasets drawn from the model on a larger lattice.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sbd_core::circulant::BccbMatrix;
use sbd_core::convolution::{convolve_columns, shifted_eigs};
use sbd_core::fft::{Fft, Fft2};
use sbd_core::gauss::sample_stationary;
use sbd_core::model::{build_correlation, BlurPrior, HyperParams, ImageMask, LatticeSpec};
use sbd_core::rng::mix_seed;
use sbd_core::special::sample_inv_gamma;

use crate::error::{Result, SbdError};
use crate::matrix_io::MatrixData;

/// How to generate one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecipe {
    pub n_vo: usize,
    pub n_ho: usize,
    pub k: usize,
    /// The generation lattice is `factor` times the observed size each way.
    pub factor: usize,
    /// Observed column with exact image values; `None` picks the central one.
    pub exact_column: Option<usize>,
    pub hyper: HyperParams,
    pub sigma_c2: Option<f64>,
    pub sigma_w2: Option<f64>,
    pub zeta: Option<f64>,
    pub seed: u64,
}

impl SimRecipe {
    pub fn new(n_vo: usize, n_ho: usize, k: usize, seed: u64) -> Self {
        Self {
            n_vo,
            n_ho,
            k,
            factor: 10,
            exact_column: None,
            hyper: HyperParams::default(),
            sigma_c2: None,
            sigma_w2: None,
            zeta: None,
            seed,
        }
    }

    pub fn exact_column(&self) -> usize {
        self.exact_column.unwrap_or(self.n_ho / 2)
    }

    pub fn generation_dims(&self) -> (usize, usize) {
        (self.n_vo * self.factor, self.n_ho * self.factor)
    }

    fn validate(&self) -> Result<()> {
        if self.factor < 2 {
            return Err(SbdError::Config("`simulate.factor` must be at least 2".into()));
        }
        if self.exact_column() >= self.n_ho {
            return Err(SbdError::Config("`simulate.exact_column` must index an observed column".into()));
        }
        Ok(())
    }
}

/// Values the data were generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub omega: Vec<f64>,
    /// Image on the observed window, column-major.
    pub image: Vec<f64>,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    pub zeta: f64,
}

/// One simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_vo: usize,
    pub n_ho: usize,
    /// Observed data window, column-major.
    pub d_obs: Vec<f64>,
    /// Noise-free `W c` on the observed window.
    pub signal: Vec<f64>,
    pub exact_column: usize,
    pub truth: SimTruth,
}

impl Dataset {
    pub fn data_matrix(&self) -> MatrixData {
        MatrixData::new(self.n_vo, self.n_ho, self.d_obs.clone())
    }

    pub fn truth_image_matrix(&self) -> MatrixData {
        MatrixData::new(self.n_vo, self.n_ho, self.truth.image.clone())
    }

    /// Observed-size image with the exact column filled and `NaN` elsewhere.
    pub fn image_obs_matrix(&self) -> MatrixData {
        let mut data = vec![f64::NAN; self.n_vo * self.n_ho];
        let off = self.exact_column * self.n_vo;
        data[off..off + self.n_vo].copy_from_slice(&self.truth.image[off..off + self.n_vo]);
        MatrixData::new(self.n_vo, self.n_ho, data)
    }

    /// Signal-to-noise ratio `Σ s² / Σ (d − s)²` on the observed window.
    pub fn snr(&self) -> f64 {
        let s: f64 = self.signal.iter().map(|v| v * v).sum();
        let e: f64 = self.d_obs.iter().zip(&self.signal).map(|(d, s)| (d - s) * (d - s)).sum();
        s / e
    }
}

/// Pixel mask and values from an observed-size matrix with `NaN` gaps.
///
/// Values come back in lattice order, as the model expects.
pub fn mask_from_image_obs(m: &MatrixData) -> (ImageMask, Vec<f64>) {
    let mut px = Vec::new();
    let mut vals = Vec::new();
    for j in 0..m.cols {
        for i in 0..m.rows {
            let v = m.get(i, j);
            if !v.is_nan() {
                px.push((i, j));
                vals.push(v);
            }
        }
    }
    if px.is_empty() {
        (ImageMask::None, vals)
    } else {
        (ImageMask::Pixels(px), vals)
    }
}

/// Draw variances, blur, image and data on the generation lattice and crop
/// the central observed window.
pub fn simulate_dataset(recipe: &SimRecipe) -> Result<Dataset> {
    recipe.validate()?;
    let hp = &recipe.hyper;
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(recipe.seed, 0x51u64));
    let (n_v, n_h) = recipe.generation_dims();

    let sigma_c2 = match recipe.sigma_c2 {
        Some(v) => v,
        None => sample_inv_gamma(hp.alpha_c, hp.beta_c, &mut rng)?,
    };
    let sigma_w2 = match recipe.sigma_w2 {
        Some(v) => v,
        None => sample_inv_gamma(hp.alpha_w, hp.beta_w, &mut rng)?,
    };
    let zeta = match recipe.zeta {
        Some(v) => v,
        None => sample_inv_gamma(hp.alpha_zeta, hp.beta_zeta, &mut rng)?,
    };
    for (name, v) in [("sigma_c2", sigma_c2), ("sigma_w2", sigma_w2), ("zeta", zeta)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(SbdError::Config(format!("`simulate.{name}` must be positive")));
        }
    }

    let lattice = LatticeSpec::new(n_v, n_h, 0, 0, recipe.k, ImageMask::None)?;
    let blur = BlurPrior::new(&lattice, hp)?;
    let omega = blur.sample_omega(sigma_w2, &mut rng);
    let w_star = blur.lift(&omega);

    let plan = Fft2::new(n_v, n_h);
    let r_c = BccbMatrix::from_kronecker(&build_correlation(n_h, hp.image_h), &build_correlation(n_v, hp.image_v));
    let eig_c: Vec<f64> = r_c.real_eigs().iter().map(|l| l * sigma_c2).collect();
    let c = sample_stationary(&plan, &eig_c, &mut rng)?;

    let sd2 = hp.psi * sigma_c2 * sigma_w2 * zeta;
    let r_d = BccbMatrix::from_kronecker(&build_correlation(n_h, hp.noise_h), &build_correlation(n_v, hp.noise_v));
    let eig_d: Vec<f64> = r_d.real_eigs().iter().map(|l| l * sd2).collect();
    let noise = sample_stationary(&plan, &eig_d, &mut rng)?;

    let plan_v = Fft::new(n_v);
    let signal_full = convolve_columns(&plan_v, &shifted_eigs(&plan_v, &w_star)?, &c);

    let (top, left) = ((n_v - recipe.n_vo) / 2, (n_h - recipe.n_ho) / 2);
    let crop = |x: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(recipe.n_vo * recipe.n_ho);
        for j in 0..recipe.n_ho {
            for i in 0..recipe.n_vo {
                out.push(x[(top + i) + n_v * (left + j)]);
            }
        }
        out
    };
    let signal = crop(&signal_full);
    let noise_obs = crop(&noise);
    let d_obs = signal.iter().zip(&noise_obs).map(|(s, e)| s + e).collect();
    Ok(Dataset {
        n_vo: recipe.n_vo,
        n_ho: recipe.n_ho,
        d_obs,
        signal,
        exact_column: recipe.exact_column(),
        truth: SimTruth { omega, image: crop(&c), sigma_c2, sigma_w2, zeta },
    })
}
