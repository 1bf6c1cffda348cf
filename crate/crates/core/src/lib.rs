//! Bayesian semi-blind deconvolution on extended cyclic lattices.
//!
//! The observed image is embedded in an `n_v x n_h` periodic lattice so that
//! every stationary covariance becomes circulant (1-D) or block-circulant with
//! circulant blocks (2-D) and is diagonalised by the unitary DFT. On top of
//! that algebra the crate provides:
//!
//! * conditional Gaussian machinery: dense conditional parameters, Fourier
//!   sampling and conditioning by Kriging for hard constraints ([`gauss`]);
//! * the hierarchical model: blur, constrained image and noise priors with
//!   inverse-gamma variance hyperpriors ([`model`]);
//! * a Gibbs sampler over the six full conditionals ([`gibbs`]);
//! * a marginal HMC blur update with the image integrated out ([`hmc`]);
//! * chain diagnostics ([`diagnostics`]).
//!
//! Grids are stored column-major: node `(row, col)` lives at `row + n_v * col`.
//! All transforms are unitary.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod circulant;
pub mod convolution;
pub mod diagnostics;
mod error;
pub mod fft;
pub mod gauss;
pub mod gibbs;
pub mod hmc;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod special;

pub use error::{Error, Result};

pub use num_complex::Complex64;
