//! Running one chain and collecting its traces.

use std::time::Instant;

use sbd_core::gibbs::{gibbs_sweep, BlurUpdate, SweepCounters};
use sbd_core::hmc::{HmcConfig, HmcState};
use sbd_core::model::{ModelState, SbdModel};
use sbd_core::rng::ChainRng;

use crate::error::Result;

/// Sampler settings for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSettings {
    pub alpha: f64,
    pub burn_in: usize,
    /// Sweeps after burn-in.
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
    pub hmc_steps: usize,
    pub hmc_eps: f64,
    /// Dual-averaging target; adaptation runs during burn-in only.
    pub adapt_target: Option<f64>,
    /// Keep every retained draw of the unobserved image pixels.
    pub keep_image: bool,
}

impl ChainSettings {
    pub fn new(alpha: f64, burn_in: usize, iterations: usize, seed: u64) -> Self {
        Self {
            alpha,
            burn_in,
            iterations,
            thin: 1,
            seed,
            hmc_steps: 40,
            hmc_eps: 0.01,
            adapt_target: Some(0.65),
            keep_image: false,
        }
    }
}

/// One row of HMC diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcRecord {
    pub sweep: usize,
    pub accepted: bool,
    pub delta_h: f64,
    pub accept_prob: f64,
    pub eps: f64,
    pub divergent: bool,
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    pub count: usize,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    /// Sample standard deviations.
    pub fn sd(&self) -> Vec<f64> {
        let denom = (self.count.max(2) - 1) as f64;
        self.m2.iter().map(|s| (s / denom).sqrt()).collect()
    }
}

/// Everything recorded from one chain after burn-in.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub omega: Vec<Vec<f64>>,
    pub sigma_c2: Vec<f64>,
    pub sigma_w2: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Retained unobserved-pixel draws, if requested.
    pub c_u: Option<Vec<Vec<f64>>>,
    /// Moments of the whole lattice image.
    pub image: RunningMoments,
    /// Moments of the data outside the observed window.
    pub d_u: RunningMoments,
    pub hmc: Vec<HmcRecord>,
    pub counters: SweepCounters,
    pub final_eps: f64,
    pub final_state: ModelState,
    pub burn_in_secs: f64,
    pub sampling_secs: f64,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.sigma_c2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_c2.is_empty()
    }

    /// Trace of one `ω` coordinate.
    pub fn omega_coord(&self, i: usize) -> Vec<f64> {
        self.omega.iter().map(|w| w[i]).collect()
    }
}

/// Run a chain from a prior draw. `observer` sees every sweep, burn-in
/// included, with its 0-based index.
pub fn run_chain<F>(model: &SbdModel, s: &ChainSettings, mut observer: F) -> Result<ChainOutput>
where
    F: FnMut(usize, &ModelState, &BlurUpdate),
{
    let mut rng = ChainRng::new(s.seed);
    let mut state = ModelState::from_prior(model, &mut rng.init)?;
    run_chain_from(model, s, &mut state, &mut rng, &mut observer)
}

pub fn run_chain_from<F>(
    model: &SbdModel,
    s: &ChainSettings,
    state: &mut ModelState,
    rng: &mut ChainRng,
    observer: &mut F,
) -> Result<ChainOutput>
where
    F: FnMut(usize, &ModelState, &BlurUpdate),
{
    let mut cfg = HmcConfig::new(s.hmc_steps, s.hmc_eps)?;
    if let Some(target) = s.adapt_target {
        if s.burn_in > 0 {
            cfg = cfg.with_adaptation(target, u64::MAX)?;
        }
    }
    let mut hs = HmcState::new(&cfg);
    let mut counters = SweepCounters::default();

    let started = Instant::now();
    for sweep in 0..s.burn_in {
        let up = gibbs_sweep(state, model, rng, s.alpha, &cfg, &mut hs, &mut counters)?;
        observer(sweep, state, &up);
    }
    hs.finish_adaptation();
    cfg.adapt = None;
    let burn_in_secs = started.elapsed().as_secs_f64();

    let kept = s.iterations / s.thin.max(1);
    let mut out = ChainOutput {
        omega: Vec::with_capacity(kept),
        sigma_c2: Vec::with_capacity(kept),
        sigma_w2: Vec::with_capacity(kept),
        zeta: Vec::with_capacity(kept),
        c_u: s.keep_image.then(Vec::new),
        image: RunningMoments::new(model.n()),
        d_u: RunningMoments::new(model.n() - model.data_selector().len()),
        hmc: Vec::new(),
        counters: SweepCounters::default(),
        final_eps: hs.eps,
        final_state: state.clone(),
        burn_in_secs,
        sampling_secs: 0.0,
    };
    let started = Instant::now();
    for it in 0..s.iterations {
        let sweep = s.burn_in + it;
        let up = gibbs_sweep(state, model, rng, s.alpha, &cfg, &mut hs, &mut counters)?;
        observer(sweep, state, &up);
        if let BlurUpdate::Hmc(o) = up {
            out.hmc.push(HmcRecord {
                sweep,
                accepted: o.accepted,
                delta_h: o.delta_h,
                accept_prob: o.accept_prob,
                eps: o.eps,
                divergent: o.divergent,
            });
        }
        if (it + 1) % s.thin.max(1) != 0 {
            continue;
        }
        out.omega.push(state.omega.clone());
        out.sigma_c2.push(state.sigma_c2);
        out.sigma_w2.push(state.sigma_w2);
        out.zeta.push(state.zeta);
        if let Some(c) = out.c_u.as_mut() {
            c.push(state.c_u(model));
        }
        out.image.push(&state.c);
        out.d_u.push(&state.d_u(model));
    }
    out.sampling_secs = started.elapsed().as_secs_f64();
    out.counters = counters;
    out.final_eps = hs.eps;
    out.final_state = state.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_moments_match_direct() {
        let xs = [[1.0, 2.0], [3.0, 5.0], [5.0, 11.0]];
        let mut m = RunningMoments::new(2);
        for x in &xs {
            m.push(x);
        }
        assert!((m.mean[0] - 3.0).abs() < 1e-15);
        assert!((m.mean[1] - 6.0).abs() < 1e-15);
        let sd = m.sd();
        assert!((sd[0] - 2.0).abs() < 1e-12);
        assert!((sd[1] - (21.0f64).sqrt()).abs() < 1e-12);
    }
}
