//! Lag-window estimate of the long-run variance of the component sequence.
//!
//! ```text
//! tau^2 = gamma(0) + 2 * sum_{0 < k <= h} parzen(k / h) * gamma_hat(k)
//! ```
//!
//! `gamma(0)` is the theoretical null variance of a component, while the
//! higher lags are sample autocovariances (divisor `p`, centered at the
//! sequence mean). The mixture of theoretical and sample terms means the
//! estimate can go negative, so it is clamped at a small positive floor.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::parzen_window;

/// Relative floor applied to the lag-window estimate.
pub const TAU_FLOOR_RELATIVE: f64 = 1e-8;

/// Sample autocovariance at lag `k` with divisor `p`.
pub fn sample_autocov(values: &[f64], k: usize) -> Result<f64> {
    let p = values.len();
    if k >= p {
        return Err(Error::domain(format!("lag {k} needs k < p = {p}")));
    }
    let mean = values.iter().sum::<f64>() / p as f64;
    Ok(autocov_centered(values, mean, k))
}

fn autocov_centered(values: &[f64], mean: f64, k: usize) -> f64 {
    let p = values.len();
    let s: f64 = values[..p - k]
        .iter()
        .zip(&values[k..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    s / p as f64
}

/// Sample autocovariances at lags `1..=h` alongside the theoretical lag-0 value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocovSequence {
    /// `gamma_hat[k - 1]` is the lag-`k` sample autocovariance.
    pub gamma_hat: Vec<f64>,
    pub gamma0_theoretical: f64,
    pub p: usize,
}

impl AutocovSequence {
    pub fn from_values(values: &[f64], gamma0_theoretical: f64, h: usize) -> Result<Self> {
        let p = values.len();
        if h >= p {
            return Err(Error::domain(format!("lag window h = {h} needs h < p = {p}")));
        }
        if !(gamma0_theoretical.is_finite() && gamma0_theoretical > 0.0) {
            return Err(Error::domain(format!(
                "theoretical gamma(0) must be positive, got {gamma0_theoretical}"
            )));
        }
        let mean = values.iter().sum::<f64>() / p as f64;
        let gamma_hat = (1..=h).map(|k| autocov_centered(values, mean, k)).collect();
        Ok(Self {
            gamma_hat,
            gamma0_theoretical,
            p,
        })
    }

    pub fn h(&self) -> usize {
        self.gamma_hat.len()
    }

    /// Parzen-weighted long-run variance, before flooring.
    pub fn weighted_sum(&self) -> f64 {
        let h = self.h() as f64;
        let lags: f64 = self
            .gamma_hat
            .iter()
            .enumerate()
            .map(|(i, g)| parzen_window((i + 1) as f64 / h) * g)
            .sum();
        self.gamma0_theoretical + 2.0 * lags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauSqEstimate {
    pub value: f64,
    /// The raw estimate fell below the floor and was clamped.
    pub floored: bool,
}

/// Lag-window estimate of `tau^2`, clamped at
/// `TAU_FLOOR_RELATIVE * gamma0_theoretical`.
pub fn tau_sq_hat(values: &[f64], gamma0_theoretical: f64, h: usize) -> Result<TauSqEstimate> {
    let seq = AutocovSequence::from_values(values, gamma0_theoretical, h)?;
    let raw = seq.weighted_sum();
    let floor = TAU_FLOOR_RELATIVE * gamma0_theoretical;
    Ok(if raw >= floor {
        TauSqEstimate {
            value: raw,
            floored: false,
        }
    } else {
        TauSqEstimate {
            value: floor,
            floored: true,
        }
    })
}
