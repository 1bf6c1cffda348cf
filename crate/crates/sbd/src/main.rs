use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sbd::commands;
use sbd::config::RunConfig;
use sbd::SbdError;

#[derive(Parser)]
#[command(name = "sbd", version, about = "Semi-blind deconvolution sampler")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override `sampler.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `io.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for experiment grids.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset.
    Simulate,
    /// Run one chain on the configured data.
    Sample,
    /// ESS, MSJD and RMSE of the traces in the output directory.
    Diagnose,
    /// Run one of the studies.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
}

#[derive(Subcommand)]
enum Experiment {
    ConstraintSweep,
    PaddingSweep,
}

fn run(cli: Cli) -> Result<(), SbdError> {
    let path = cli.config.ok_or_else(|| SbdError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SbdError::Config(format!("--threads: {e}")))?;
    }
    let out = commands::out_dir(&cfg, cli.out.as_deref())?;
    match cli.command {
        Command::Simulate => {
            commands::cmd_simulate(&cfg, &out)?;
        }
        Command::Sample => {
            commands::cmd_sample(&cfg, &out)?;
        }
        Command::Diagnose => {
            let p = commands::cmd_diagnose(&cfg, &out)?;
            log::info!("wrote {}", p.display());
        }
        Command::Experiment { which: Experiment::ConstraintSweep } => {
            commands::cmd_constraint_sweep(&cfg, &out)?;
        }
        Command::Experiment { which: Experiment::PaddingSweep } => {
            commands::cmd_padding_sweep(&cfg, &out)?;
        }
    }
    log::info!("outputs in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SBD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
