//! The constraint sweep and the padding sweep.

use rayon::prelude::*;

use sbd_core::diagnostics::{ess, msjd};
use sbd_core::gauss::complement;
use sbd_core::model::{HyperParams, ImageMask, LatticeSpec, SbdModel};
use sbd_core::rng::ChainRng;

use crate::chain::{run_chain, ChainSettings};
use crate::error::Result;
use crate::simulate::{simulate_dataset, Dataset, SimRecipe};

/// Shared settings of both sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub burn_in: usize,
    pub iterations: usize,
    pub seed: u64,
    pub hmc_steps: usize,
    pub hmc_eps: f64,
    pub adapt_target: f64,
    pub ess_max_lag: usize,
    pub hyper: HyperParams,
    pub k: usize,
}

impl SweepSettings {
    fn chain(&self, alpha: f64, seed: u64, keep_image: bool) -> ChainSettings {
        ChainSettings {
            alpha,
            burn_in: self.burn_in,
            iterations: self.iterations,
            thin: 1,
            seed,
            hmc_steps: self.hmc_steps,
            hmc_eps: self.hmc_eps,
            adapt_target: Some(self.adapt_target),
            keep_image,
        }
    }
}

/// Mixing summary of one parameter in one constraint-sweep run.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingRow {
    pub m: usize,
    pub alpha: f64,
    pub parameter: String,
    pub ess: f64,
    pub msjd: f64,
}

/// Mode behaviour of one constraint-sweep run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub m: usize,
    pub alpha: f64,
    /// Sign changes of `⟨ω, ω_true⟩` after burn-in.
    pub sign_flips: usize,
    /// Fraction of post-burn-in sweeps with `⟨ω, ω_true⟩ < 0`.
    pub negative_fraction: f64,
    pub hmc_acceptance: f64,
    pub final_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSweep {
    pub dataset: Dataset,
    pub mixing: Vec<MixingRow>,
    pub modes: Vec<ModeRow>,
}

/// `m` rows centred on the middle of a column of length `n`.
pub fn centred_rows(n: usize, m: usize) -> Vec<usize> {
    let start = (n / 2).saturating_sub(m / 2);
    (start..(start + m).min(n)).collect()
}

/// Count sign changes, ignoring exact zeros.
pub fn sign_changes(xs: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &x in xs {
        if x == 0.0 {
            continue;
        }
        if last != 0.0 && (x > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = x;
    }
    count
}

fn ess_or_nan(trace: &[f64], max_lag: usize) -> f64 {
    let lag = max_lag.min(trace.len().saturating_sub(1));
    ess(trace, lag).unwrap_or(f64::NAN)
}

/// Chain index for a grid cell, so a cell replays independently of the grid.
fn cell_key(a: usize, b: usize) -> u64 {
    ((a as u64) << 32) | b as u64
}

/// Gibbs and HMC chains on a `n x 1` column for each number of exact pixels.
pub fn constraint_sweep(
    rows: usize,
    m_values: &[usize],
    alphas: &[f64],
    s: &SweepSettings,
) -> Result<ConstraintSweep> {
    let recipe = SimRecipe { hyper: s.hyper, ..SimRecipe::new(rows, 1, s.k, s.seed) };
    let dataset = simulate_dataset(&recipe)?;
    let cells: Vec<(usize, f64)> = m_values.iter().flat_map(|&m| alphas.iter().map(move |&a| (m, a))).collect();
    let results = cells
        .par_iter()
        .map(|&(m, alpha)| -> Result<(Vec<MixingRow>, ModeRow)> {
            let sel = centred_rows(rows, m);
            let mask = if sel.is_empty() {
                ImageMask::None
            } else {
                ImageMask::Product { rows: sel.clone(), cols: vec![0] }
            };
            let lattice = LatticeSpec::new(rows, 1, 0, 0, s.k, mask)?;
            let c_obs: Vec<f64> = sel.iter().map(|&r| dataset.truth.image[r]).collect();
            let model = SbdModel::new(lattice, s.hyper, dataset.d_obs.clone(), c_obs)?;
            let truth = &dataset.truth.omega;
            let mut proj = Vec::with_capacity(s.iterations);
            let burn = s.burn_in;
            let out = run_chain(&model, &s.chain(alpha, ChainRng::chain_seed(s.seed, cell_key(m, (alpha * 1000.0) as usize)), true), |sweep, st, _| {
                if sweep >= burn {
                    proj.push(st.omega.iter().zip(truth).map(|(a, b)| a * b).sum::<f64>());
                }
            })?;
            let mut mixing = Vec::new();
            let mut push = |name: String, tr: &[f64]| {
                mixing.push(MixingRow {
                    m,
                    alpha,
                    parameter: name,
                    ess: ess_or_nan(tr, s.ess_max_lag),
                    msjd: msjd(tr).unwrap_or(f64::NAN),
                });
            };
            for i in 0..model.k() {
                push(format!("omega_{i}"), &out.omega_coord(i));
            }
            if let Some(c) = &out.c_u {
                let width = c.first().map_or(0, Vec::len);
                for j in 0..width {
                    let tr: Vec<f64> = c.iter().map(|r| r[j]).collect();
                    push(format!("c_u_{j}"), &tr);
                }
            }
            push("sigma_c2".into(), &out.sigma_c2);
            push("sigma_w2".into(), &out.sigma_w2);
            push("zeta".into(), &out.zeta);
            let negative = proj.iter().filter(|v| **v < 0.0).count();
            let hmc_acceptance = if out.hmc.is_empty() {
                f64::NAN
            } else {
                out.hmc.iter().filter(|r| r.accepted).count() as f64 / out.hmc.len() as f64
            };
            let mode = ModeRow {
                m,
                alpha,
                sign_flips: sign_changes(&proj),
                negative_fraction: negative as f64 / proj.len().max(1) as f64,
                hmc_acceptance,
                final_eps: out.final_eps,
            };
            Ok((mixing, mode))
        })
        .collect::<Vec<_>>();
    let mut mixing = Vec::new();
    let mut modes = Vec::new();
    for r in results {
        let (mx, md) = r?;
        mixing.extend(mx);
        modes.push(md);
    }
    Ok(ConstraintSweep { dataset, mixing, modes })
}

/// RMSEs of one padding cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddingRow {
    pub m_v: usize,
    pub m_h: usize,
    /// Mean over coordinates of the per-coordinate RMSE.
    pub rmse_omega: f64,
    /// Mean over unobserved window pixels of the per-pixel RMSE.
    pub rmse_c_u: f64,
    pub rmse_sigma_c2: f64,
    pub rmse_sigma_w2: f64,
    pub rmse_zeta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaddingSweep {
    pub dataset: Dataset,
    pub rows: Vec<PaddingRow>,
}

/// Gibbs chains on one simulated dataset for every `(m_v, m_h)` pair.
pub fn padding_sweep(
    n_vo: usize,
    n_ho: usize,
    mv_values: &[usize],
    mh_values: &[usize],
    recipe_factor: usize,
    s: &SweepSettings,
) -> Result<PaddingSweep> {
    let recipe = SimRecipe { hyper: s.hyper, factor: recipe_factor, ..SimRecipe::new(n_vo, n_ho, s.k, s.seed) };
    let dataset = simulate_dataset(&recipe)?;
    let (mask, c_obs) = crate::simulate::mask_from_image_obs(&dataset.image_obs_matrix());
    let cells: Vec<(usize, usize)> = mv_values.iter().flat_map(|&a| mh_values.iter().map(move |&b| (a, b))).collect();
    let rows = cells
        .par_iter()
        .map(|&(m_v, m_h)| -> Result<PaddingRow> {
            let lattice = LatticeSpec::new(n_vo, n_ho, m_v, m_h, s.k, mask.clone())?;
            let window: Vec<usize> = lattice.data_selector();
            let free_window: Vec<usize> = {
                let exact = lattice.image_selector();
                let free = complement(&exact, lattice.n());
                window.iter().copied().filter(|i| free.binary_search(i).is_ok()).collect()
            };
            // truth image is indexed like the observed window
            let truth_of: Vec<f64> = free_window
                .iter()
                .map(|&li| {
                    let pos = window.iter().position(|&w| w == li).expect("pixel inside the window");
                    dataset.truth.image[pos]
                })
                .collect();
            let model = SbdModel::new(lattice, s.hyper, dataset.d_obs.clone(), c_obs.clone())?;
            let k = model.k();
            let mut se_omega = vec![0.0; k];
            let mut se_c = vec![0.0; free_window.len()];
            let mut se_var = [0.0; 3];
            let mut count = 0usize;
            let burn = s.burn_in;
            let t = &dataset.truth;
            run_chain(&model, &s.chain(0.0, ChainRng::chain_seed(s.seed, cell_key(m_v, m_h)), false), |sweep, st, _| {
                if sweep < burn {
                    return;
                }
                count += 1;
                for (e, (a, b)) in se_omega.iter_mut().zip(st.omega.iter().zip(&t.omega)) {
                    *e += (a - b) * (a - b);
                }
                for (e, (&li, tv)) in se_c.iter_mut().zip(free_window.iter().zip(&truth_of)) {
                    *e += (st.c[li] - tv) * (st.c[li] - tv);
                }
                for (e, (a, b)) in
                    se_var.iter_mut().zip([(st.sigma_c2, t.sigma_c2), (st.sigma_w2, t.sigma_w2), (st.zeta, t.zeta)])
                {
                    *e += (a - b) * (a - b);
                }
            })?;
            let n = count.max(1) as f64;
            let mean_rmse = |v: &[f64]| v.iter().map(|e| (e / n).sqrt()).sum::<f64>() / v.len().max(1) as f64;
            Ok(PaddingRow {
                m_v,
                m_h,
                rmse_omega: mean_rmse(&se_omega),
                rmse_c_u: mean_rmse(&se_c),
                rmse_sigma_c2: (se_var[0] / n).sqrt(),
                rmse_sigma_w2: (se_var[1] / n).sqrt(),
                rmse_zeta: (se_var[2] / n).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PaddingSweep { dataset, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_rows_are_symmetric() {
        assert_eq!(centred_rows(24, 0), Vec::<usize>::new());
        assert_eq!(centred_rows(24, 2), vec![11, 12]);
        assert_eq!(centred_rows(24, 4), vec![10, 11, 12, 13]);
        assert_eq!(centred_rows(24, 24), (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn sign_change_count() {
        assert_eq!(sign_changes(&[1.0, 2.0, -1.0, 0.0, -3.0, 4.0]), 2);
        assert_eq!(sign_changes(&[]), 0);
    }
}
