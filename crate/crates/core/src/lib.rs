//! Diagonal likelihood ratio tests (DLRT) for high-dimensional mean vectors.
//!
//! The one- and two-sample statistics are sums of log-transformed squared
//! t-statistics, standardized with exact finite-sample null moments and a
//! lag-window variance estimate that tolerates dependence between
//! neighbouring coordinates.
//!
//! Modules:
//! - [`specfun`]: digamma/trigamma and the null moment constants
//! - [`dlrt`]: the test statistics, p-values and asymptotic power
//! - [`spectral`]: the lag-window long-run variance estimate
//! - [`baselines`]: Hotelling-type comparison statistics, permutation calibrated
//! - [`datagen`]: Gaussian and heavy-tailed data with structured covariance
//! - [`simharness`]: replicated size/power experiments

pub mod baselines;
pub mod datagen;
pub mod dlrt;
pub mod error;
pub mod rng;
pub mod sample;
pub mod simharness;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use sample::Sample;
