//! File formats, chain running, experiments and dense reference checks for
//! the deconvolution sampler in `sbd-core`.

pub mod chain;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod matrix_io;
pub mod oracle;
pub mod output;
pub mod simulate;

pub use error::{Result, SbdError};
