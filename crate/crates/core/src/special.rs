//! Inverse-gamma helpers.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::{Error, Result};

/// Log-density of `IG(shape, scale)` at `x`.
pub fn inv_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * libm::log(scale) - libm::lgamma(shape) - (shape + 1.0) * libm::log(x) - scale / x
}

/// One draw from `IG(shape, scale)` as the reciprocal of a gamma variate.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::NonPositiveScale { name: "shape", value: shape });
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonPositiveScale { name: "scale", value: scale });
    }
    let g = Gamma::new(shape, 1.0 / scale).map_err(|_| Error::NonPositiveScale { name: "shape", value: shape })?;
    Ok(1.0 / g.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logpdf_integrates_to_one() {
        let (a, b) = (3.0, 2.0);
        let mut acc = 0.0;
        let h = 1e-3;
        let mut x = h / 2.0;
        while x < 200.0 {
            acc += inv_gamma_logpdf(x, a, b).exp() * h;
            x += h;
        }
        assert!((acc - 1.0).abs() < 1e-4);
    }

    #[test]
    fn sample_mean_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, b) = (5.0, 8.0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_inv_gamma(a, b, &mut rng).unwrap()).sum::<f64>() / n as f64;
        // mean b/(a-1) = 2, sd = 2/sqrt(3)
        assert!((mean - 2.0).abs() < 4.0 * (2.0 / 3f64.sqrt()) / (n as f64).sqrt());
        assert!(sample_inv_gamma(1.0, -1.0, &mut rng).is_err());
    }
}
