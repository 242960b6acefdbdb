//! Digamma/trigamma and the closed-form null moments of the log-transformed
//! squared t-statistic.
//!
//! For a t-statistic with `nu` degrees of freedom and a scale `n`, the
//! component `n * log(1 + t^2 / nu)` has
//!
//! ```text
//! E U   = n D(nu)
//! E U^2 = n^2 { D(nu)^2 - 2 D'(nu) }
//! D(x)  = psi((x + 1) / 2) - psi(x / 2)
//! ```
//!
//! One-sample tests use `(n, n - 1)`; two-sample tests use `(N, N - 2)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Below this argument the upward recurrence is applied before the
/// asymptotic series.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// `B_{2k} / (2k)` for k = 1..8.
const DIGAMMA_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// `B_{2k}` for k = 1..8.
const TRIGAMMA_SERIES: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: format!("{name} requires a finite positive argument, got {x}"),
        })
    }
}

/// Digamma function `psi(x) = Gamma'(x) / Gamma(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        shift -= 1.0 / z;
        z += 1.0;
    }
    let inv_z2 = 1.0 / (z * z);
    let mut power = inv_z2;
    let mut tail = 0.0;
    for coeff in DIGAMMA_SERIES {
        tail += coeff * power;
        power *= inv_z2;
    }
    Ok(shift + (z.ln() - 0.5 / z - tail))
}

/// Trigamma function `psi'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive("trigamma", x)?;
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / (z * z);
        z += 1.0;
    }
    let inv_z = 1.0 / z;
    let inv_z2 = inv_z * inv_z;
    // psi'(z) ~ 1/z + 1/(2 z^2) + sum B_{2k} / z^{2k+1}
    let mut power = inv_z2 * inv_z;
    let mut tail = 0.0;
    for coeff in TRIGAMMA_SERIES {
        tail += coeff * power;
        power *= inv_z2;
    }
    Ok(shift + inv_z + 0.5 * inv_z2 + tail)
}

/// `D(x) = psi((x + 1) / 2) - psi(x / 2)`.
pub fn dfun(x: f64) -> Result<f64> {
    check_positive("dfun", x)?;
    Ok(digamma(0.5 * (x + 1.0))? - digamma(0.5 * x)?)
}

/// Derivative `D'(x) = [psi'((x + 1) / 2) - psi'(x / 2)] / 2`.
pub fn dfun_prime(x: f64) -> Result<f64> {
    check_positive("dfun_prime", x)?;
    Ok(0.5 * (trigamma(0.5 * (x + 1.0))? - trigamma(0.5 * x)?))
}

/// Exact first two moments of `scale_n * log(1 + t^2 / nu)` under the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullMoments {
    pub nu: u64,
    pub scale_n: u64,
    pub m1: f64,
    pub m2: f64,
    pub var_u: f64,
}

impl NullMoments {
    /// Theoretical lag-0 autocovariance of the component sequence.
    pub fn gamma0(&self) -> f64 {
        self.var_u
    }
}

pub fn null_moments(scale_n: u64, nu: u64) -> Result<NullMoments> {
    if nu < 1 || scale_n < 1 {
        return Err(Error::Domain {
            what: format!("null moments need nu >= 1 and n >= 1 (got nu={nu}, n={scale_n})"),
        });
    }
    let nu_f = nu as f64;
    let n = scale_n as f64;
    let d = dfun(nu_f)?;
    let dp = dfun_prime(nu_f)?;
    let m1 = n * d;
    let m2 = n * n * (d * d - 2.0 * dp);
    // -2 n^2 D' is the variance; this form avoids cancelling m2 - m1^2.
    let var_u = -2.0 * n * n * dp;
    Ok(NullMoments {
        nu,
        scale_n,
        m1,
        m2,
        var_u,
    })
}

/// Truncated large-sample expansion of the null mean,
/// `n * sum_{i=1..k} (-1)^{i+1} a_i / i` with
/// `a_i = prod_{l=1..i} (2l - 1) / (nu - 2l)`.
///
/// Requires `1 <= k < nu / 2`.
pub fn xi_k(scale_n: u64, nu: u64, k: u32) -> Result<f64> {
    if k == 0 || 2 * u64::from(k) >= nu {
        return Err(Error::Domain {
            what: format!("expansion undefined: need 1 <= k < nu/2 (k={k}, nu={nu})"),
        });
    }
    let nu_f = nu as f64;
    let mut a = 1.0;
    let mut sum = 0.0;
    for i in 1..=k {
        let i_f = f64::from(i);
        a *= (2.0 * i_f - 1.0) / (nu_f - 2.0 * i_f);
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * a / i_f;
    }
    Ok(scale_n as f64 * sum)
}

/// Parzen lag window.
pub fn parzen_window(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.5 {
        1.0 - 6.0 * ax * ax + 6.0 * ax * ax * ax
    } else if ax < 1.0 {
        let r = 1.0 - ax;
        2.0 * r * r * r
    } else {
        0.0
    }
}
