//! Diagonal likelihood ratio test statistics.
//!
//! Under a diagonal-covariance working model the likelihood ratio for the
//! mean reduces to a sum of log-transformed squared t-statistics:
//!
//! ```text
//! one-sample:  T1 = n * sum_j log(1 + t_j^2 / (n - 1))
//! two-sample:  T2 = N * sum_j log(1 + t_j^2 / (N - 2)),  N = n1 + n2
//! ```
//!
//! The statistic is centered by its exact finite-sample null mean and scaled
//! by a lag-window estimate of the long-run variance of the components, so
//! correlation between neighbouring coordinates is allowed. Rejection is in
//! the upper tail only.

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sample::{is_negligible_spread, summarize, Sample};
use crate::specfun::{null_moments, xi_k};
use crate::spectral::tau_sq_hat;

pub const DEFAULT_LAG_H: usize = 5;
pub const DEFAULT_EXPANSION_K: u32 = 3;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Upper-tail probability `1 - Phi(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal().sf(x)
}

/// `z_alpha` with `Phi(z_alpha) = 1 - alpha`.
pub fn upper_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let normal = std_normal();
    let z = normal.inverse_cdf(1.0 - alpha);
    // One Newton step on the upper tail: the library inverse is only good to ~1e-12.
    let density = normal.pdf(z);
    if density > 0.0 {
        Ok(z + (normal.sf(z) - alpha) / density)
    } else {
        Ok(z)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// How the raw statistic is centered and scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Centering {
    /// Exact null mean `p * m1`, lag-window variance estimate.
    ExactM1,
    /// Large-sample expansion of the null mean with `k` terms, variance 2.
    Expansion { k: u32 },
}

impl Default for Centering {
    fn default() -> Self {
        Centering::ExactM1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlrtOptions {
    pub lag_h: usize,
    pub centering: Centering,
}

impl Default for DlrtOptions {
    fn default() -> Self {
        Self {
            lag_h: DEFAULT_LAG_H,
            centering: Centering::ExactM1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic_raw: f64,
    pub statistic_std: f64,
    pub p_value: f64,
    pub tau_sq_hat: f64,
    /// The lag-window estimate was clamped to its positive floor.
    pub tau_floored: bool,
    pub centering: Centering,
    pub n_scale: u64,
    pub nu: u64,
    pub p: usize,
    pub lag_h: usize,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Per-coordinate components `n_scale * log(1 + t_j^2 / nu)`; they sum to
/// the test statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSequence {
    pub values: Vec<f64>,
    pub n_scale: u64,
    pub nu: u64,
}

impl ComponentSequence {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn t_stats_one_sample(x: &Sample, mu0: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = (x.n(), x.p());
    if n < 2 {
        return Err(Error::InvalidSample {
            what: format!("one-sample test needs n >= 2, got {n}"),
        });
    }
    if mu0.len() != p {
        return Err(Error::DimensionMismatch {
            what: format!("mu0 has length {} but the sample has p = {p}", mu0.len()),
        });
    }
    let root_n = (n as f64).sqrt();
    (0..p)
        .map(|j| {
            let s = summarize(x.column(j));
            if is_negligible_spread(s.sum_sq, s.max_abs, n) {
                return Err(Error::DegenerateVariance { coordinate: j });
            }
            let sd = (s.sum_sq / (n - 1) as f64).sqrt();
            Ok(root_n * (s.mean - mu0[j]) / sd)
        })
        .collect()
}

pub fn t_stats_two_sample(x: &Sample, y: &Sample) -> Result<Vec<f64>> {
    let (n1, n2) = (x.n(), y.n());
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidSample {
            what: format!("two-sample test needs n1, n2 >= 2, got ({n1}, {n2})"),
        });
    }
    if x.p() != y.p() {
        return Err(Error::DimensionMismatch {
            what: format!("samples have p = {} and p = {}", x.p(), y.p()),
        });
    }
    let total = (n1 + n2) as f64;
    let scale = ((n1 * n2) as f64 / total).sqrt();
    (0..x.p())
        .map(|j| {
            let a = summarize(x.column(j));
            let b = summarize(y.column(j));
            let sum_sq = a.sum_sq + b.sum_sq;
            if is_negligible_spread(sum_sq, a.max_abs.max(b.max_abs), n1 + n2) {
                return Err(Error::DegenerateVariance { coordinate: j });
            }
            let pooled = sum_sq / (total - 2.0);
            Ok(scale * (a.mean - b.mean) / pooled.sqrt())
        })
        .collect()
}

pub fn dlrt_components(t: &[f64], n_scale: u64, nu: u64) -> Result<ComponentSequence> {
    if nu < 1 {
        return Err(Error::domain("degrees of freedom must be at least 1"));
    }
    let n = n_scale as f64;
    let nu_f = nu as f64;
    let values = t.iter().map(|tj| n * (tj * tj / nu_f).ln_1p()).collect();
    Ok(ComponentSequence {
        values,
        n_scale,
        nu,
    })
}

/// Centers and scales a component sequence against its null distribution.
pub fn standardize(components: &ComponentSequence, opts: &DlrtOptions) -> Result<TestResult> {
    let p = components.values.len();
    let moments = null_moments(components.n_scale, components.nu)?;
    let statistic_raw = components.total();
    let p_f = p as f64;
    let (center, tau) = match opts.centering {
        Centering::ExactM1 => (
            moments.m1,
            tau_sq_hat(&components.values, moments.gamma0(), opts.lag_h)?,
        ),
        Centering::Expansion { k } => (
            xi_k(components.n_scale, components.nu, k)?,
            crate::spectral::TauSqEstimate {
                value: 2.0,
                floored: false,
            },
        ),
    };
    let statistic_std = (statistic_raw - p_f * center) / (tau.value.sqrt() * p_f.sqrt());
    Ok(TestResult {
        statistic_raw,
        statistic_std,
        p_value: std_normal_sf(statistic_std),
        tau_sq_hat: tau.value,
        tau_floored: tau.floored,
        centering: opts.centering,
        n_scale: components.n_scale,
        nu: components.nu,
        p,
        lag_h: opts.lag_h,
    })
}

/// One-sample DLRT of `H0: mu = mu0`.
pub fn dlrt_one_sample(x: &Sample, mu0: &[f64], opts: &DlrtOptions) -> Result<TestResult> {
    let t = t_stats_one_sample(x, mu0)?;
    let n = x.n() as u64;
    standardize(&dlrt_components(&t, n, n - 1)?, opts)
}

/// Two-sample DLRT of `H0: mu1 = mu2` under a common covariance.
pub fn dlrt_two_sample(x: &Sample, y: &Sample, opts: &DlrtOptions) -> Result<TestResult> {
    let t = t_stats_two_sample(x, y)?;
    let total = (x.n() + y.n()) as u64;
    standardize(&dlrt_components(&t, total, total - 2)?, opts)
}

/// Asymptotic power `1 - Phi(z_alpha - (Delta'Delta / sqrt(p)) / sqrt(tau^2))`.
pub fn theoretical_power(delta_sq_sum: f64, p: usize, tau_sq: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(delta_sq_sum >= 0.0) || delta_sq_sum.is_nan() {
        return Err(Error::domain(format!(
            "delta_sq_sum must be non-negative, got {delta_sq_sum}"
        )));
    }
    if p == 0 {
        return Err(Error::domain("p must be at least 1"));
    }
    if !(tau_sq.is_finite() && tau_sq > 0.0) {
        return Err(Error::domain(format!("tau_sq must be positive, got {tau_sq}")));
    }
    let z_alpha = upper_quantile(alpha)?;
    let shift = delta_sq_sum / (p as f64).sqrt() / tau_sq.sqrt();
    Ok(std_normal_sf(z_alpha - shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Sample {
        Sample::from_rows(values.len(), 1, values).unwrap()
    }

    #[test]
    fn one_sample_t_examples() {
        assert_eq!(t_stats_one_sample(&col(&[1.0, 2.0, 3.0]), &[2.0]).unwrap(), vec![0.0]);
        let t = t_stats_one_sample(&col(&[0.0, 2.0, 4.0]), &[0.0]).unwrap();
        assert!((t[0] - 3f64.sqrt()).abs() < 1e-14);
        let err = t_stats_one_sample(&col(&[0.7, 0.7, 0.7]), &[0.0]).unwrap_err();
        assert_eq!(err, Error::DegenerateVariance { coordinate: 0 });
        assert!(t_stats_one_sample(&col(&[1.0]), &[0.0]).is_err());
        assert!(matches!(
            t_stats_one_sample(&col(&[1.0, 2.0]), &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn two_sample_t_examples() {
        let a = col(&[1.0, 2.0, 3.0]);
        assert_eq!(t_stats_two_sample(&a, &a).unwrap(), vec![0.0]);
        let t = t_stats_two_sample(&col(&[0.0, 2.0]), &col(&[2.0, 4.0])).unwrap();
        assert!((t[0] + 2f64.sqrt()).abs() < 1e-14);
        let wide = Sample::from_rows(2, 2, &[0.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            t_stats_two_sample(&wide, &a),
            Err(Error::DimensionMismatch { .. })
        ));
        let flat = col(&[5.0, 5.0]);
        assert!(t_stats_two_sample(&flat, &flat).unwrap_err().is_degenerate());
    }

    #[test]
    fn component_examples() {
        let zero = dlrt_components(&[0.0; 4], 5, 4).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        assert_eq!(zero.total(), 0.0);
        let c = dlrt_components(&[3f64.sqrt()], 3, 2).unwrap();
        assert!((c.values[0] - 3.0 * 2.5f64.ln()).abs() < 1e-12);
        assert!((c.values[0] - 2.748_872).abs() < 1e-6);
    }

    #[test]
    fn centered_data_favours_null() {
        // every column has mean exactly mu0
        let x = Sample::from_rows(3, 4, &[
            1.0, 2.0, -1.0, 0.0, //
            2.0, 4.0, 0.0, 5.0, //
            3.0, 6.0, 1.0, 10.0,
        ])
        .unwrap();
        let mu0 = [2.0, 4.0, 0.0, 5.0];
        let opts = DlrtOptions {
            lag_h: 2,
            ..Default::default()
        };
        let r = dlrt_one_sample(&x, &mu0, &opts).unwrap();
        assert_eq!(r.statistic_raw, 0.0);
        assert!(r.statistic_std < 0.0);
        assert!(r.p_value > 0.5);
        let m = null_moments(3, 2).unwrap();
        let want = -4.0 * m.m1 / (r.tau_sq_hat.sqrt() * 2.0);
        assert!((r.statistic_std - want).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_zero() {
        let x = Sample::from_rows(3, 2, &[1.0, 0.0, 2.0, 5.0, 4.0, 1.0]).unwrap();
        let r = dlrt_two_sample(&x, &x, &DlrtOptions { lag_h: 1, ..Default::default() }).unwrap();
        assert_eq!(r.statistic_raw, 0.0);
        assert!((r.p_value - (1.0 - std_normal_cdf(r.statistic_std))).abs() < 1e-15);
        assert_eq!((r.n_scale, r.nu, r.p), (6, 4, 2));
    }

    #[test]
    fn lag_zero_matches_iid_standardization() {
        let x = Sample::from_rows(4, 3, &[
            0.3, 1.0, -2.0, 1.1, 0.2, 0.5, -0.4, 2.2, 1.0, 0.9, -1.0, 0.0,
        ])
        .unwrap();
        let r = dlrt_one_sample(&x, &[0.0; 3], &DlrtOptions { lag_h: 0, ..Default::default() })
            .unwrap();
        let m = null_moments(4, 3).unwrap();
        let want = (r.statistic_raw - 3.0 * m.m1) / (3.0 * (m.m2 - m.m1 * m.m1)).sqrt();
        assert!((r.statistic_std - want).abs() < 1e-12);
    }

    #[test]
    fn expansion_mode_uses_root_two_p() {
        let x = Sample::from_rows(8, 2, &[
            0.1, 0.2, 0.5, -0.3, 1.0, 0.8, -0.2, 0.0, 0.4, 0.4, 0.9, -1.0, -0.5, 0.3, 0.2, 0.6,
        ])
        .unwrap();
        let opts = DlrtOptions {
            lag_h: 1,
            centering: Centering::Expansion { k: 3 },
        };
        let r = dlrt_one_sample(&x, &[0.0, 0.0], &opts).unwrap();
        let xi = xi_k(8, 7, 3).unwrap();
        assert!((r.statistic_std - (r.statistic_raw - 2.0 * xi) / 2.0).abs() < 1e-12);
        assert_eq!(r.tau_sq_hat, 2.0);
        let too_many = DlrtOptions {
            lag_h: 1,
            centering: Centering::Expansion { k: 4 },
        };
        assert!(dlrt_one_sample(&x, &[0.0, 0.0], &too_many).is_err());
    }

    #[test]
    fn power_examples() {
        let alpha = 0.05;
        assert!((theoretical_power(0.0, 100, 2.0, alpha).unwrap() - alpha).abs() < 1e-12);
        let z = upper_quantile(alpha).unwrap();
        let p = 400;
        let tau_sq: f64 = 2.3;
        let half = z * tau_sq.sqrt() * (p as f64).sqrt();
        assert!((theoretical_power(half, p, tau_sq, alpha).unwrap() - 0.5).abs() < 1e-12);
        assert!(theoretical_power(1e6, p, tau_sq, alpha).unwrap() > 1.0 - 1e-12);
        let mut prev = 0.0;
        for i in 0..100 {
            let b = theoretical_power(i as f64, p, tau_sq, alpha).unwrap();
            assert!(b >= prev);
            prev = b;
        }
        assert!(theoretical_power(1.0, p, tau_sq, 0.0).is_err());
        assert!(theoretical_power(1.0, p, tau_sq, 1.0).is_err());
        assert!(theoretical_power(-1.0, p, tau_sq, 0.05).is_err());
    }
}
