//! JSON run configuration.
//!
//! ```json
//! {
//!   "model":   { "observed_rows": 24, "observed_cols": 6, "blur_length": 10 },
//!   "sampler": { "alpha": 0.5, "iterations": 2000, "seed": 7 },
//!   "io":      { "data": "sim/data.csv", "image_obs": "sim/image_obs.csv", "out_dir": "chain" }
//! }
//! ```
//!
//! Every section and field is optional except where a command needs it;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbd_core::model::{CorrelationSpec, HyperParams};

use crate::error::{Result, SbdError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlation {
    pub phi: f64,
    pub p: f64,
}

impl From<Correlation> for CorrelationSpec {
    fn from(c: Correlation) -> Self {
        CorrelationSpec { phi: c.phi, p: c.p }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCorrelation {
    #[serde(default = "default_field")]
    pub vertical: Correlation,
    #[serde(default = "default_field")]
    pub horizontal: Correlation,
}

impl Default for FieldCorrelation {
    fn default() -> Self {
        Self { vertical: default_field(), horizontal: default_field() }
    }
}

fn default_field() -> Correlation {
    Correlation { phi: 1.5, p: 1.0 }
}

fn default_blur() -> Correlation {
    Correlation { phi: 2.0, p: 1.98 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Priors {
    pub alpha_c: f64,
    pub beta_c: f64,
    pub alpha_w: f64,
    pub beta_w: f64,
    pub alpha_zeta: f64,
    pub beta_zeta: f64,
}

impl Default for Priors {
    fn default() -> Self {
        let h = HyperParams::default();
        Self {
            alpha_c: h.alpha_c,
            beta_c: h.beta_c,
            alpha_w: h.alpha_w,
            beta_w: h.beta_w,
            alpha_zeta: h.alpha_zeta,
            beta_zeta: h.beta_zeta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub observed_rows: usize,
    pub observed_cols: usize,
    /// Padding rows; defaults to half the observed rows, rounded up.
    #[serde(default)]
    pub pad_rows: Option<usize>,
    /// Padding columns; defaults to the observed column count.
    #[serde(default)]
    pub pad_cols: Option<usize>,
    #[serde(default = "default_k")]
    pub blur_length: usize,
    #[serde(default = "default_psi")]
    pub psi: f64,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default = "default_blur")]
    pub blur_correlation: Correlation,
    #[serde(default)]
    pub image_correlation: FieldCorrelation,
    #[serde(default)]
    pub noise_correlation: FieldCorrelation,
}

fn default_k() -> usize {
    10
}

fn default_psi() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn pad_rows(&self) -> usize {
        self.pad_rows.unwrap_or(self.observed_rows.div_ceil(2))
    }

    pub fn pad_cols(&self) -> usize {
        self.pad_cols.unwrap_or(self.observed_cols)
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            alpha_c: self.priors.alpha_c,
            beta_c: self.priors.beta_c,
            alpha_w: self.priors.alpha_w,
            beta_w: self.priors.beta_w,
            alpha_zeta: self.priors.alpha_zeta,
            beta_zeta: self.priors.beta_zeta,
            psi: self.psi,
            blur: self.blur_correlation.clone().into(),
            image_h: self.image_correlation.horizontal.clone().into(),
            image_v: self.image_correlation.vertical.clone().into(),
            noise_h: self.noise_correlation.horizontal.clone().into(),
            noise_v: self.noise_correlation.vertical.clone().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmcSettings {
    pub steps: usize,
    pub eps: f64,
    pub adapt: bool,
    pub target_accept: f64,
}

impl Default for HmcSettings {
    fn default() -> Self {
        Self { steps: 40, eps: 0.01, adapt: true, target_accept: 0.65 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageTrace {
    /// Posterior mean and standard deviation of the image only.
    Summary,
    /// Every retained draw of the unobserved image pixels.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Probability of an HMC blur update in each sweep.
    pub alpha: f64,
    /// Post-burn-in sweeps.
    pub iterations: usize,
    /// Burn-in sweeps; defaults to half of `iterations` (a third of the run).
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    pub hmc: HmcSettings,
    pub image_trace: ImageTrace,
    /// Largest autocorrelation lag used by `diagnose`.
    pub ess_max_lag: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            iterations: 1000,
            burn_in: None,
            thin: 1,
            seed: 1,
            hmc: HmcSettings::default(),
            image_trace: ImageTrace::Summary,
            ess_max_lag: 1500,
        }
    }
}

impl SamplerConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Observed data matrix (`.csv` or `.bin`).
    pub data: Option<PathBuf>,
    /// Exactly observed image pixels: observed-size matrix, `NaN` elsewhere.
    pub image_obs: Option<PathBuf>,
    /// Ground truth written by `simulate`, used by `diagnose`.
    pub truth: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Generation lattice is this many times the observed size in each direction.
    pub factor: usize,
    /// Observed column whose image values are exact; defaults to the central one.
    pub exact_column: Option<usize>,
    pub sigma_c2: Option<f64>,
    pub sigma_w2: Option<f64>,
    pub zeta: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { factor: 10, exact_column: None, sigma_c2: None, sigma_w2: None, zeta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub m_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
    pub pad_rows_values: Vec<usize>,
    pub pad_cols_values: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m_values: (0..=24).step_by(2).collect(),
            alpha_values: vec![0.0, 1.0],
            pad_rows_values: vec![0, 2, 6, 12, 24, 36, 48, 72],
            pad_cols_values: vec![0, 6, 12],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub io: IoConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SbdError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SbdError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            SbdError::Config(msg) => SbdError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(SbdError::Config(format!("`{key}` {why}")));
        let m = &self.model;
        if m.observed_rows == 0 {
            return bad("model.observed_rows", "must be positive");
        }
        if m.observed_cols == 0 {
            return bad("model.observed_cols", "must be positive");
        }
        if m.blur_length == 0 {
            return bad("model.blur_length", "must be positive");
        }
        if !(m.psi > 0.0) {
            return bad("model.psi", "must be positive");
        }
        let priors = [
            ("model.priors.alpha_c", m.priors.alpha_c),
            ("model.priors.beta_c", m.priors.beta_c),
            ("model.priors.alpha_w", m.priors.alpha_w),
            ("model.priors.beta_w", m.priors.beta_w),
            ("model.priors.alpha_zeta", m.priors.alpha_zeta),
            ("model.priors.beta_zeta", m.priors.beta_zeta),
        ];
        for (key, v) in priors {
            if !(v > 0.0) || !v.is_finite() {
                return bad(key, "must be positive");
            }
        }
        let corrs = [
            ("model.blur_correlation", &m.blur_correlation),
            ("model.image_correlation.vertical", &m.image_correlation.vertical),
            ("model.image_correlation.horizontal", &m.image_correlation.horizontal),
            ("model.noise_correlation.vertical", &m.noise_correlation.vertical),
            ("model.noise_correlation.horizontal", &m.noise_correlation.horizontal),
        ];
        for (key, c) in corrs {
            if !(c.phi > 0.0) {
                return bad(&format!("{key}.phi"), "must be positive");
            }
            if !(c.p > 0.0 && c.p <= 2.0) {
                return bad(&format!("{key}.p"), "must lie in (0, 2]");
            }
        }
        let s = &self.sampler;
        if !(0.0..=1.0).contains(&s.alpha) {
            return bad("sampler.alpha", "must lie in [0, 1]");
        }
        if s.thin == 0 {
            return bad("sampler.thin", "must be at least 1");
        }
        if s.hmc.steps == 0 {
            return bad("sampler.hmc.steps", "must be at least 1");
        }
        if !(s.hmc.eps > 0.0) {
            return bad("sampler.hmc.eps", "must be positive");
        }
        if !(s.hmc.target_accept > 0.0 && s.hmc.target_accept < 1.0) {
            return bad("sampler.hmc.target_accept", "must lie in (0, 1)");
        }
        if self.simulate.factor == 0 {
            return bad("simulate.factor", "must be at least 1");
        }
        if let Some(c) = self.simulate.exact_column {
            if c >= m.observed_cols {
                return bad("simulate.exact_column", "must index an observed column");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serialises"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_json(r#"{"model": {"observed_rows": 24, "observed_cols": 6}}"#).unwrap();
        assert_eq!(c.model.pad_rows(), 12);
        assert_eq!(c.model.pad_cols(), 6);
        assert_eq!(c.model.blur_length, 10);
        assert_eq!(c.model.hyper(), HyperParams::default());
        assert_eq!(c.sampler.burn_in(), 500);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_json(r#"{"model": {"observed_rows": 4, "observed_cols": 1, "bogus": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn invalid_value_is_named() {
        let e = RunConfig::from_json(r#"{"model": {"observed_rows": 4, "observed_cols": 1}, "sampler": {"alpha": 2}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("sampler.alpha"), "{e}");
    }

    #[test]
    fn round_trip_and_hash() {
        let c = RunConfig::from_json(r#"{"model": {"observed_rows": 8, "observed_cols": 3}}"#).unwrap();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_eq!(c.hash().len(), 64);
    }
}
