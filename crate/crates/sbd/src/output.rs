//! Trace files, summaries and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbd_core::model::SbdModel;

use crate::chain::ChainOutput;
use crate::error::{Result, SbdError};
use crate::matrix_io::{fmt_f64, write_atomic, write_matrix, MatrixData};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A trace file: named columns, one row per retained iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn new(names: Vec<String>) -> Self {
        Self { names, rows: Vec::new() }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for r in &self.rows {
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{}", fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| SbdError::format(path, "empty trace file"))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| SbdError::format(path, format!("bad number on line {}", i + 2)))?;
            if row.len() != names.len() {
                return Err(SbdError::format(path, format!("line {} has {} values, expected {}", i + 2, row.len(), names.len())));
            }
            rows.push(row);
        }
        Ok(Self { names, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SbdError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

fn scalar_table(name: &str, xs: &[f64]) -> TraceTable {
    TraceTable { names: vec![name.to_string()], rows: xs.iter().map(|&v| vec![v]).collect() }
}

/// Trace files written by `sample`, keyed by parameter block.
pub const TRACE_FILES: [&str; 4] = ["omega.csv", "sigma_c2.csv", "sigma_w2.csv", "zeta.csv"];

/// Run metadata written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<String>,
    #[serde(default)]
    pub stats: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub timings: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            version: VERSION.to_string(),
            seed,
            config_hash,
            files: Vec::new(),
            stats: Default::default(),
            timings: Default::default(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        write_atomic(&dir.join("manifest.json"), text.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| SbdError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| SbdError::format(&path, e.to_string()))
    }
}

/// Write every trace and summary of a chain into `dir`; returns the file names.
pub fn write_chain(dir: &Path, model: &SbdModel, out: &ChainOutput) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut put = |name: &str, table: TraceTable| -> Result<()> {
        table.write(&dir.join(name))?;
        files.push(name.to_string());
        Ok(())
    };
    let k = model.k();
    put(
        "omega.csv",
        TraceTable { names: (0..k).map(|i| format!("omega_{i}")).collect(), rows: out.omega.clone() },
    )?;
    put("sigma_c2.csv", scalar_table("sigma_c2", &out.sigma_c2))?;
    put("sigma_w2.csv", scalar_table("sigma_w2", &out.sigma_w2))?;
    put("zeta.csv", scalar_table("zeta", &out.zeta))?;
    if let Some(c) = &out.c_u {
        let width = c.first().map_or(0, Vec::len);
        put("c_u.csv", TraceTable { names: (0..width).map(|i| format!("c_u_{i}")).collect(), rows: c.clone() })?;
    }
    let sd = out.d_u.sd();
    put(
        "d_u_summary.csv",
        TraceTable {
            names: vec!["index".into(), "mean".into(), "sd".into()],
            rows: out.d_u.mean.iter().zip(&sd).enumerate().map(|(i, (m, s))| vec![i as f64, *m, *s]).collect(),
        },
    )?;
    put(
        "hmc.csv",
        TraceTable {
            names: ["sweep", "accepted", "delta_h", "accept_prob", "eps", "divergent"].map(String::from).to_vec(),
            rows: out
                .hmc
                .iter()
                .map(|r| {
                    vec![r.sweep as f64, r.accepted as u8 as f64, r.delta_h, r.accept_prob, r.eps, r.divergent as u8 as f64]
                })
                .collect(),
        },
    )?;
    drop(put);
    let lat = model.lattice();
    let image_sd = out.image.sd();
    for (name, grid) in [("image_mean.csv", &out.image.mean), ("image_sd.csv", &image_sd)] {
        write_matrix(&dir.join(name), &MatrixData::new(lat.n_v(), lat.n_h(), grid.clone()))?;
        files.push(name.to_string());
    }
    Ok(files)
}

/// Ground truth of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub omega: Vec<f64>,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    pub zeta: f64,
    /// Matrix file with the image on the observed window.
    pub image: PathBuf,
}

impl TruthFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SbdError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| SbdError::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self).expect("truth serialises").as_bytes())
    }
}
