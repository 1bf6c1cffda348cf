//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use sbd_core::diagnostics::{ess, msjd, rmse, summary};
use sbd_core::model::{LatticeSpec, SbdModel};

use crate::chain::{run_chain, ChainSettings};
use crate::config::{ImageTrace, RunConfig};
use crate::error::{Result, SbdError};
use crate::experiments::{constraint_sweep, padding_sweep, SweepSettings};
use crate::matrix_io::{fmt_f64, read_matrix, write_atomic, write_matrix};
use crate::output::{write_chain, Manifest, TraceTable, TruthFile, TRACE_FILES};
use crate::simulate::{mask_from_image_obs, simulate_dataset, SimRecipe};

/// Output directory from `--out` or `io.out_dir`.
pub fn out_dir(cfg: &RunConfig, flag: Option<&Path>) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.io.out_dir.clone())
        .ok_or_else(|| SbdError::Config("`io.out_dir` is required (or pass --out)".into()))
}

/// Assemble the model from the configured data files.
pub fn build_model(cfg: &RunConfig) -> Result<SbdModel> {
    let m = &cfg.model;
    let data_path = cfg.io.data.as_ref().ok_or_else(|| SbdError::Config("`io.data` is required".into()))?;
    let data = read_matrix(data_path)?;
    if (data.rows, data.cols) != (m.observed_rows, m.observed_cols) {
        return Err(SbdError::format(
            data_path,
            format!("data is {}x{}, config declares {}x{}", data.rows, data.cols, m.observed_rows, m.observed_cols),
        ));
    }
    let (mask, c_obs) = match &cfg.io.image_obs {
        Some(p) => {
            let im = read_matrix(p)?;
            if (im.rows, im.cols) != (data.rows, data.cols) {
                return Err(SbdError::format(p, "image observations must match the data dimensions"));
            }
            mask_from_image_obs(&im)
        }
        None => (Default::default(), Vec::new()),
    };
    let lattice = LatticeSpec::new(m.observed_rows, m.observed_cols, m.pad_rows(), m.pad_cols(), m.blur_length, mask)?;
    Ok(SbdModel::new(lattice, m.hyper(), data.data, c_obs)?)
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let m = &cfg.model;
    let sim = &cfg.simulate;
    let recipe = SimRecipe {
        factor: sim.factor,
        exact_column: sim.exact_column,
        hyper: m.hyper(),
        sigma_c2: sim.sigma_c2,
        sigma_w2: sim.sigma_w2,
        zeta: sim.zeta,
        ..SimRecipe::new(m.observed_rows, m.observed_cols, m.blur_length, cfg.sampler.seed)
    };
    let ds = simulate_dataset(&recipe)?;
    write_matrix(&out.join("data.csv"), &ds.data_matrix())?;
    write_matrix(&out.join("image_obs.csv"), &ds.image_obs_matrix())?;
    write_matrix(&out.join("truth_image.csv"), &ds.truth_image_matrix())?;
    let t = &ds.truth;
    TruthFile {
        omega: t.omega.clone(),
        sigma_c2: t.sigma_c2,
        sigma_w2: t.sigma_w2,
        zeta: t.zeta,
        image: PathBuf::from("truth_image.csv"),
    }
    .write(&out.join("truth.json"))?;
    let mut man = Manifest::new("simulate", cfg.sampler.seed, cfg.hash());
    man.files = ["data.csv", "image_obs.csv", "truth_image.csv", "truth.json"].map(String::from).to_vec();
    man.stats.insert("snr".into(), json!(ds.snr()));
    man.stats.insert("exact_column".into(), json!(ds.exact_column));
    man.write(out)?;
    Ok(man)
}

pub fn cmd_sample(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let t0 = Instant::now();
    let model = build_model(cfg)?;
    let setup_secs = t0.elapsed().as_secs_f64();
    let s = &cfg.sampler;
    let settings = ChainSettings {
        alpha: s.alpha,
        burn_in: s.burn_in(),
        iterations: s.iterations,
        thin: s.thin,
        seed: s.seed,
        hmc_steps: s.hmc.steps,
        hmc_eps: s.hmc.eps,
        adapt_target: s.hmc.adapt.then_some(s.hmc.target_accept),
        keep_image: s.image_trace == ImageTrace::Full,
    };
    let chain = run_chain(&model, &settings, |sweep, _, _| {
        if (sweep + 1) % 1000 == 0 {
            log::info!("sweep {}", sweep + 1);
        }
    })?;
    let files = write_chain(out, &model, &chain)?;
    let mut man = Manifest::new("sample", s.seed, cfg.hash());
    man.files = files;
    let c = &chain.counters;
    man.stats.insert("retained".into(), json!(chain.len()));
    man.stats.insert("gibbs_blur_updates".into(), json!(c.gibbs_blur));
    man.stats.insert("hmc_blur_updates".into(), json!(c.hmc_blur));
    man.stats.insert("hmc_accepted".into(), json!(c.hmc_accepted));
    man.stats.insert("final_eps".into(), json!(chain.final_eps));
    man.stats.insert("lattice".into(), json!([model.lattice().n_v(), model.lattice().n_h()]));
    man.timings.insert("setup_secs".into(), json!(setup_secs));
    man.timings.insert("burn_in_secs".into(), json!(chain.burn_in_secs));
    man.timings.insert("sampling_secs".into(), json!(chain.sampling_secs));
    man.write(out)?;
    Ok(man)
}

/// ESS, MSJD and summaries of every trace in a `sample` directory, plus RMSE
/// against `io.truth` when given.
pub fn cmd_diagnose(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let truth = cfg.io.truth.as_ref().map(|p| TruthFile::read(p)).transpose()?;
    let mut s = String::from("parameter,n,mean,sd,q025,median,q975,ess,msjd,rmse\n");
    for name in TRACE_FILES {
        let table = TraceTable::read(&dir.join(name))?;
        for (j, col) in table.names.iter().enumerate() {
            let tr = table.column(j);
            if tr.is_empty() {
                continue;
            }
            let sm = summary(&tr)?;
            let lag = cfg.sampler.ess_max_lag.min(tr.len().saturating_sub(1));
            let e = ess(&tr, lag).unwrap_or(f64::NAN);
            let jump = msjd(&tr).unwrap_or(f64::NAN);
            let true_value = truth.as_ref().and_then(|t| match col.as_str() {
                "sigma_c2" => Some(t.sigma_c2),
                "sigma_w2" => Some(t.sigma_w2),
                "zeta" => Some(t.zeta),
                c => c.strip_prefix("omega_").and_then(|i| i.parse::<usize>().ok()).and_then(|i| t.omega.get(i).copied()),
            });
            let r = true_value.map_or(f64::NAN, |v| rmse(&tr, v).unwrap_or(f64::NAN));
            let _ = writeln!(
                s,
                "{col},{},{},{},{},{},{},{},{},{}",
                tr.len(),
                fmt_f64(sm.mean),
                fmt_f64(sm.sd),
                fmt_f64(sm.q025),
                fmt_f64(sm.median),
                fmt_f64(sm.q975),
                fmt_f64(e),
                fmt_f64(jump),
                fmt_f64(r)
            );
        }
    }
    let path = dir.join("diagnostics.csv");
    write_atomic(&path, s.as_bytes())?;
    Ok(path)
}

fn sweep_settings(cfg: &RunConfig) -> SweepSettings {
    let s = &cfg.sampler;
    SweepSettings {
        burn_in: s.burn_in(),
        iterations: s.iterations,
        seed: s.seed,
        hmc_steps: s.hmc.steps,
        hmc_eps: s.hmc.eps,
        adapt_target: s.hmc.target_accept,
        ess_max_lag: s.ess_max_lag,
        hyper: cfg.model.hyper(),
        k: cfg.model.blur_length,
    }
}

pub fn cmd_constraint_sweep(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let t0 = Instant::now();
    let e = &cfg.experiment;
    let res = constraint_sweep(cfg.model.observed_rows, &e.m_values, &e.alpha_values, &sweep_settings(cfg))?;
    let mut s = String::from("m,alpha,parameter,ess,msjd\n");
    for r in &res.mixing {
        let _ = writeln!(s, "{},{},{},{},{}", r.m, fmt_f64(r.alpha), r.parameter, fmt_f64(r.ess), fmt_f64(r.msjd));
    }
    write_atomic(&out.join("constraint_mixing.csv"), s.as_bytes())?;
    let mut s = String::from("m,alpha,sign_flips,negative_fraction,hmc_acceptance,final_eps\n");
    for r in &res.modes {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.m,
            fmt_f64(r.alpha),
            r.sign_flips,
            fmt_f64(r.negative_fraction),
            fmt_f64(r.hmc_acceptance),
            fmt_f64(r.final_eps)
        );
    }
    write_atomic(&out.join("constraint_modes.csv"), s.as_bytes())?;
    let mut man = Manifest::new("experiment constraint-sweep", cfg.sampler.seed, cfg.hash());
    man.files = vec!["constraint_mixing.csv".into(), "constraint_modes.csv".into()];
    man.timings.insert("total_secs".into(), json!(t0.elapsed().as_secs_f64()));
    man.write(out)?;
    Ok(man)
}

pub fn cmd_padding_sweep(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let t0 = Instant::now();
    let e = &cfg.experiment;
    let m = &cfg.model;
    let res = padding_sweep(
        m.observed_rows,
        m.observed_cols,
        &e.pad_rows_values,
        &e.pad_cols_values,
        cfg.simulate.factor,
        &sweep_settings(cfg),
    )?;
    let mut s = String::from("m_v,m_h,rmse_omega,rmse_c_u,rmse_sigma_c2,rmse_sigma_w2,rmse_zeta\n");
    for r in &res.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.m_v,
            r.m_h,
            fmt_f64(r.rmse_omega),
            fmt_f64(r.rmse_c_u),
            fmt_f64(r.rmse_sigma_c2),
            fmt_f64(r.rmse_sigma_w2),
            fmt_f64(r.rmse_zeta)
        );
    }
    write_atomic(&out.join("padding_rmse.csv"), s.as_bytes())?;
    let mut man = Manifest::new("experiment padding-sweep", cfg.sampler.seed, cfg.hash());
    man.files = vec!["padding_rmse.csv".into()];
    man.timings.insert("total_secs".into(), json!(t0.elapsed().as_secs_f64()));
    man.write(out)?;
    Ok(man)
}
