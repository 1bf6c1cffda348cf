//! Chain diagnostics.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Sample autocorrelations `ρ̂_1..=ρ̂_max_lag` (mean-centred, divisor `N`).
pub fn autocorrelation(trace: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = trace.len();
    if max_lag >= n {
        return Err(Error::InvalidArgument(alloc::format!("max_lag {max_lag} must be below the trace length {n}")));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let c0: f64 = centred.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Err(Error::DegenerateTrace);
    }
    Ok((1..=max_lag)
        .map(|lag| {
            let c: f64 = centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum();
            c / n as f64 / c0
        })
        .collect())
}

/// `N / (1 + 2 Σ_{j=1}^{max_lag} ρ̂_j)`, clamped to `(0, N]`.
pub fn ess(trace: &[f64], max_lag: usize) -> Result<f64> {
    let n = trace.len() as f64;
    let rho = autocorrelation(trace, max_lag)?;
    let tau = 1.0 + 2.0 * rho.iter().sum::<f64>();
    if tau <= 0.0 {
        return Ok(n);
    }
    Ok((n / tau).clamp(f64::MIN_POSITIVE, n))
}

/// Mean squared jumping distance `Σ (θ_j − θ_{j−1})² / N`.
pub fn msjd(trace: &[f64]) -> Result<f64> {
    if trace.len() < 2 {
        return Err(Error::InvalidArgument("MSJD needs at least two samples".into()));
    }
    let s: f64 = trace.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(s / trace.len() as f64)
}

/// Root mean squared error of a trace around a true value.
pub fn rmse(trace: &[f64], truth: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("RMSE needs at least one sample".into()));
    }
    let s: f64 = trace.iter().map(|v| (v - truth) * (v - truth)).sum();
    Ok(libm::sqrt(s / trace.len() as f64))
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(trace: &[f64], q: f64) -> Result<f64> {
    if trace.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument("quantile needs a non-empty trace and q in [0, 1]".into()));
    }
    let mut v = trace.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Ok(v[lo] + frac * (v[hi] - v[lo]))
}

/// Mean, standard deviation and the 2.5/50/97.5% quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

pub fn summary(trace: &[f64]) -> Result<Summary> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::InvalidArgument("summary of an empty trace".into()));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { trace.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Ok(Summary {
        mean,
        sd: libm::sqrt(var),
        q025: quantile(trace, 0.025)?,
        median: quantile(trace, 0.5)?,
        q975: quantile(trace, 0.975)?,
    })
}
