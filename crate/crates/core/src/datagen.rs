//! Synthetic data for the simulation study.
//!
//! The common covariance is `Sigma = D R D` with `D = diag(sigma_11, ..., sigma_pp)`
//! (standard deviations) and `R` a correlation matrix. Variances are drawn once
//! per dataset and shared by both samples of a two-sample problem.
//!
//! Gaussian rows are generated as `mu + D R^{1/2} z`, which has covariance
//! `Sigma` exactly; `R^{1/2}` is computed once per correlation structure.
//! Heavy-tailed rows use the symmetric root of `Sigma` itself, because for
//! non-Gaussian `z` the choice of factor changes the distribution.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream_rng, StreamRng};
use crate::sample::Sample;

/// Pareto shape used for heavy-tailed data.
pub const HEAVY_TAIL_A: f64 = 16.5;
/// Pareto scale used for heavy-tailed data.
pub const HEAVY_TAIL_B: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum VarianceLaw {
    /// `sigma_jj^2 ~ chi^2_5 / 5`, independently per coordinate.
    Chisq5Scaled,
    /// Variances equally spaced on `[lo, hi]`, increasing in `j`.
    Equispaced { lo: f64, hi: f64 },
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correlation {
    Ind,
    /// `r_ij = rho^|i-j|`.
    Ar1 { rho: f64 },
    /// Fractional-Gaussian-noise correlation with Hurst exponent `hurst`.
    Lrd { hurst: f64 },
}

impl Correlation {
    pub fn label(&self) -> &'static str {
        match self {
            Correlation::Ind => "ind",
            Correlation::Ar1 { .. } => "srd",
            Correlation::Lrd { .. } => "lrd",
        }
    }

    /// The structure's parameter, 0 for independence.
    pub fn parameter(&self) -> f64 {
        match *self {
            Correlation::Ind => 0.0,
            Correlation::Ar1 { rho } => rho,
            Correlation::Lrd { hurst } => hurst,
        }
    }

    /// Entry of `R` at distance `k = |i - j|`.
    pub fn at_lag(&self, k: usize) -> f64 {
        match *self {
            Correlation::Ind => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Correlation::Ar1 { rho } => rho.powi(k as i32),
            Correlation::Lrd { hurst } => {
                let two_h = 2.0 * hurst;
                let k = k as f64;
                0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).abs().powf(two_h)
                    - 2.0 * k.powf(two_h))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub p: usize,
    pub variance_law: VarianceLaw,
    pub correlation: Correlation,
}

impl CovarianceSpec {
    pub fn new(p: usize, variance_law: VarianceLaw, correlation: Correlation) -> Self {
        Self {
            p,
            variance_law,
            correlation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::domain("p must be at least 1"));
        }
        match self.variance_law {
            VarianceLaw::Equispaced { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                return Err(Error::domain(format!(
                    "equispaced variances need 0 < lo <= hi, got [{lo}, {hi}]"
                )));
            }
            _ => {}
        }
        match self.correlation {
            Correlation::Ar1 { rho } if !(rho > -1.0 && rho < 1.0) => {
                Err(Error::domain(format!("AR(1) rho must lie in (-1, 1), got {rho}")))
            }
            Correlation::Lrd { hurst } if !(hurst > 0.5 && hurst < 1.0) => {
                Err(Error::domain(format!("Hurst exponent must lie in (0.5, 1), got {hurst}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// Fraction of coordinates carrying signal.
    pub beta: f64,
    /// Effect size in units of the coordinate's standard deviation.
    pub theta: f64,
}

/// Correlation matrix `R` for the spec.
pub fn build_correlation(spec: &CovarianceSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let p = spec.p;
    let by_lag: Vec<f64> = (0..p).map(|k| spec.correlation.at_lag(k)).collect();
    Ok(DMatrix::from_fn(p, p, |i, j| by_lag[i.abs_diff(j)]))
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Factorization {
            what: format!("matrix is {}x{}", m.nrows(), m.ncols()),
        });
    }
    let eig = SymmetricEigen::new(m.clone());
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let smallest = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !smallest.is_finite() || smallest < -1e-8 * largest.max(1.0) {
        return Err(Error::Factorization {
            what: format!("matrix is not positive semidefinite (eigenvalue {smallest:e})"),
        });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let vecs = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * roots[j]);
    let root = &scaled * vecs.transpose();
    // remove asymmetric rounding
    Ok((&root + root.transpose()) * 0.5)
}

/// Correlation structure with its square root computed once, from which
/// per-dataset covariances are drawn.
#[derive(Debug, Clone)]
pub struct PreparedCovariance {
    spec: CovarianceSpec,
    /// `R` and `R^{1/2}`; `None` under independence.
    corr: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl PreparedCovariance {
    pub fn new(spec: &CovarianceSpec) -> Result<Self> {
        spec.validate()?;
        let corr = match spec.correlation {
            Correlation::Ind => None,
            _ => {
                let r = build_correlation(spec)?;
                let root = symmetric_sqrt(&r)?;
                Some((r, root))
            }
        };
        Ok(Self { spec: *spec, corr })
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    /// Draws the per-coordinate standard deviations.
    pub fn draw_sd<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p = self.spec.p;
        match self.spec.variance_law {
            VarianceLaw::Unit => vec![1.0; p],
            VarianceLaw::Equispaced { lo, hi } => (0..p)
                .map(|j| {
                    let frac = if p == 1 { 0.0 } else { j as f64 / (p - 1) as f64 };
                    (lo + (hi - lo) * frac).sqrt()
                })
                .collect(),
            VarianceLaw::Chisq5Scaled => {
                let chi = ChiSquared::<f64>::new(5.0).expect("5 degrees of freedom is valid");
                (0..p).map(|_| (chi.sample(rng) / 5.0_f64).sqrt()).collect()
            }
        }
    }

    /// Draws one covariance matrix (i.e. one set of variances).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Covariance<'_> {
        Covariance {
            sd: self.draw_sd(rng),
            prepared: self,
            sigma_root: OnceLock::new(),
        }
    }

    /// Covariance with the given standard deviations.
    pub fn with_sd(&self, sd: Vec<f64>) -> Result<Covariance<'_>> {
        if sd.len() != self.spec.p || sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::domain("standard deviations must be p positive values"));
        }
        Ok(Covariance {
            sd,
            prepared: self,
            sigma_root: OnceLock::new(),
        })
    }
}

/// A realized covariance `D R D`.
#[derive(Debug)]
pub struct Covariance<'a> {
    sd: Vec<f64>,
    prepared: &'a PreparedCovariance,
    sigma_root: OnceLock<std::result::Result<DMatrix<f64>, Error>>,
}

impl Covariance<'_> {
    /// Standard deviations `sigma_jj`.
    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    pub fn p(&self) -> usize {
        self.sd.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        match &self.prepared.corr {
            None => DMatrix::from_fn(p, p, |i, j| if i == j { self.sd[i] * self.sd[i] } else { 0.0 }),
            Some((r, _)) => DMatrix::from_fn(p, p, |i, j| self.sd[i] * r[(i, j)] * self.sd[j]),
        }
    }

    /// Symmetric `Sigma^{1/2}`; `None` when `Sigma` is diagonal.
    fn sigma_root(&self) -> Result<Option<&DMatrix<f64>>> {
        if self.prepared.corr.is_none() {
            return Ok(None);
        }
        match self.sigma_root.get_or_init(|| symmetric_sqrt(&self.matrix())) {
            Ok(m) => Ok(Some(m)),
            Err(e) => Err(e.clone()),
        }
    }

    fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: format!("mean has length {} but p = {}", mu.len(), self.p()),
            });
        }
        Ok(())
    }

    /// `n` Gaussian rows with mean `mu` and covariance `Sigma`.
    pub fn sample_normal<R: Rng + ?Sized>(&self, mu: &[f64], n: usize, rng: &mut R) -> Result<Sample> {
        self.check_mu(mu)?;
        let p = self.p();
        let z: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = DMatrix::from_row_slice(n, p, &z);
        if let Some((_, root)) = &self.prepared.corr {
            x = &x * root;
        }
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (s, m) = (self.sd[j], mu[j]);
            col.apply(|v| *v = m + s * *v);
        }
        Sample::new(x)
    }

    /// `n` rows of `mu + Sigma^{1/2} z / c0` with double-Pareto(16.5, 8) entries in `z`.
    pub fn sample_heavy_tailed<R: Rng + ?Sized>(
        &self,
        mu: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Result<Sample> {
        self.check_mu(mu)?;
        let p = self.p();
        let c0 = double_pareto_variance(HEAVY_TAIL_A, HEAVY_TAIL_B).sqrt();
        let z = double_pareto_draws(HEAVY_TAIL_A, HEAVY_TAIL_B, n * p, rng)?;
        let z = DMatrix::from_row_slice(n, p, &z) / c0;
        let mut x = match self.sigma_root()? {
            Some(root) => &z * root,
            None => {
                let mut z = z;
                for (j, mut col) in z.column_iter_mut().enumerate() {
                    col *= self.sd[j];
                }
                z
            }
        };
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(mu[j]);
        }
        Sample::new(x)
    }
}

/// Variance of the double Pareto distribution, `2 b^2 / ((a - 1)(a - 2))`.
pub fn double_pareto_variance(a: f64, b: f64) -> f64 {
    2.0 * b * b / ((a - 1.0) * (a - 2.0))
}

fn double_pareto_draws<R: Rng + ?Sized>(a: f64, b: f64, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(a > 2.0 && a.is_finite()) {
        return Err(Error::domain(format!("double Pareto needs a > 2 for finite variance, got {a}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("double Pareto needs b > 0, got {b}")));
    }
    let inv_a = 1.0 / a;
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let magnitude = b * ((1.0 - u).powf(-inv_a) - 1.0);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect())
}

/// `count` draws of `U V` with `U` Pareto (`F(x) = 1 - (1 + x/b)^{-a}`,
/// by inversion) and `V` a fair random sign.
pub fn sample_double_pareto(a: f64, b: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, &[domain::SAMPLER, 1]);
    double_pareto_draws(a, b, count, &mut rng)
}

fn sampler_rng(seed: u64, which: u64) -> StreamRng {
    stream_rng(seed, &[domain::SAMPLER, which])
}

/// Draws variances for `spec`, then `n` Gaussian rows with mean `mu`.
pub fn sample_mvn(mu: &[f64], spec: &CovarianceSpec, n: usize, seed: u64) -> Result<Sample> {
    let prepared = PreparedCovariance::new(spec)?;
    let mut rng = sampler_rng(seed, 2);
    prepared.draw(&mut rng).sample_normal(mu, n, &mut rng)
}

/// Draws variances for `spec`, then `n` heavy-tailed rows with mean `mu`.
pub fn sample_heavy_tailed(mu: &[f64], spec: &CovarianceSpec, n: usize, seed: u64) -> Result<Sample> {
    let prepared = PreparedCovariance::new(spec)?;
    let mut rng = sampler_rng(seed, 3);
    prepared.draw(&mut rng).sample_heavy_tailed(mu, n, &mut rng)
}

/// Number of signal coordinates, `beta * p` rounded half up.
pub fn signal_count(beta: f64, p: usize) -> usize {
    let raw = beta * p as f64;
    // absorb representation error such as 0.15 * 10 = 1.5000000000000002
    ((raw + 0.5 + 1e-9).floor() as usize).min(p)
}

/// Sets the first `round(beta * p)` coordinates to `theta * sigma_jj`.
pub fn inject_signal(mu_base: &[f64], sigma_diag: &[f64], signal: &SignalSpec) -> Result<Vec<f64>> {
    if mu_base.len() != sigma_diag.len() {
        return Err(Error::DimensionMismatch {
            what: format!("mean has length {}, sd has {}", mu_base.len(), sigma_diag.len()),
        });
    }
    if !(0.0..=1.0).contains(&signal.beta) {
        return Err(Error::domain(format!("beta must lie in [0, 1], got {}", signal.beta)));
    }
    let p0 = signal_count(signal.beta, mu_base.len());
    Ok(mu_base
        .iter()
        .zip(sigma_diag)
        .enumerate()
        .map(|(j, (&m, &s))| if j < p0 { signal.theta * s } else { m })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: usize, law: VarianceLaw, corr: Correlation) -> CovarianceSpec {
        CovarianceSpec::new(p, law, corr)
    }

    #[test]
    fn correlation_examples() {
        let ind = build_correlation(&spec(4, VarianceLaw::Unit, Correlation::Ind)).unwrap();
        assert_eq!(ind, DMatrix::identity(4, 4));
        let ar = build_correlation(&spec(5, VarianceLaw::Unit, Correlation::Ar1 { rho: 0.6 })).unwrap();
        assert!((ar[(0, 2)] - 0.36).abs() < 1e-15);
        let lrd =
            build_correlation(&spec(6, VarianceLaw::Unit, Correlation::Lrd { hurst: 0.625 })).unwrap();
        for i in 0..6 {
            assert_eq!(lrd[(i, i)], 1.0);
        }
        let h2 = 1.25_f64;
        assert!((lrd[(0, 1)] - 0.5 * (2f64.powf(h2) - 2.0)).abs() < 1e-15);
        assert_eq!(lrd, lrd.transpose());
    }

    #[test]
    fn invalid_specs() {
        assert!(build_correlation(&spec(3, VarianceLaw::Unit, Correlation::Ar1 { rho: 1.0 })).is_err());
        assert!(build_correlation(&spec(3, VarianceLaw::Unit, Correlation::Lrd { hurst: 0.4 })).is_err());
        assert!(build_correlation(&spec(0, VarianceLaw::Unit, Correlation::Ind)).is_err());
        let bad = spec(3, VarianceLaw::Equispaced { lo: 0.0, hi: 1.0 }, Correlation::Ind);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sqrt_reconstructs() {
        let r = build_correlation(&spec(30, VarianceLaw::Unit, Correlation::Lrd { hurst: 0.625 })).unwrap();
        let root = symmetric_sqrt(&r).unwrap();
        assert!((&root * &root - &r).abs().max() < 1e-10);
        let not_psd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(symmetric_sqrt(&not_psd).is_err());
    }

    #[test]
    fn equispaced_variances() {
        let prepared =
            PreparedCovariance::new(&spec(3, VarianceLaw::Equispaced { lo: 0.01, hi: 150.0 }, Correlation::Ind))
                .unwrap();
        let sd = prepared.draw_sd(&mut sampler_rng(0, 0));
        let var: Vec<f64> = sd.iter().map(|s| s * s).collect();
        assert!((var[0] - 0.01).abs() < 1e-12 && (var[2] - 150.0).abs() < 1e-9);
        assert!((var[1] - 75.005).abs() < 1e-9);
    }

    #[test]
    fn chisq_variances_average_one() {
        let prepared =
            PreparedCovariance::new(&spec(100_000, VarianceLaw::Chisq5Scaled, Correlation::Ind)).unwrap();
        let sd = prepared.draw_sd(&mut sampler_rng(11, 0));
        let mean = sd.iter().map(|s| s * s).sum::<f64>() / sd.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn mvn_determinism_and_mean() {
        let s = spec(2, VarianceLaw::Unit, Correlation::Ind);
        let mu = [1.5, -2.0];
        let a = sample_mvn(&mu, &s, 10_000, 3).unwrap();
        let b = sample_mvn(&mu, &s, 10_000, 3).unwrap();
        assert_eq!(a, b);
        let bound = 4.0 / 100.0;
        for j in 0..2 {
            let m = a.column(j).iter().sum::<f64>() / 10_000.0;
            assert!((m - mu[j]).abs() < bound);
        }
        assert_ne!(a, sample_mvn(&mu, &s, 10_000, 4).unwrap());
    }

    #[test]
    fn mvn_ar1_neighbour_correlation() {
        let s = spec(2, VarianceLaw::Unit, Correlation::Ar1 { rho: 0.6 });
        let x = sample_mvn(&[0.0, 0.0], &s, 10_000, 9).unwrap();
        let (a, b) = (x.column(0), x.column(1));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(u, v)| (u - ma) * (v - mb)).sum();
        let va: f64 = a.iter().map(|u| (u - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
        let r = cov / (va * vb).sqrt();
        assert!((r - 0.6).abs() < 0.05, "{r}");
    }

    #[test]
    fn double_pareto_moments() {
        assert!(sample_double_pareto(2.0, 8.0, 10, 0).is_err());
        assert!(sample_double_pareto(3.0, 0.0, 10, 0).is_err());
        let z = sample_double_pareto(HEAVY_TAIL_A, HEAVY_TAIL_B, 1_000_000, 5).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "{mean}");
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 512.0 / 899.0;
        assert!((double_pareto_variance(HEAVY_TAIL_A, HEAVY_TAIL_B) - target).abs() < 1e-15);
        assert!(((var - target) / target).abs() < 0.02, "{var}");
        // median of |Z| is F^{-1}(1/2) = b (2^{1/a} - 1)
        let mut abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let median = abs[abs.len() / 2];
        let want = HEAVY_TAIL_B * (2f64.powf(1.0 / HEAVY_TAIL_A) - 1.0);
        assert!((median - want).abs() < 0.005, "{median} vs {want}");
    }

    #[test]
    fn heavy_tailed_marginals() {
        let s = spec(1, VarianceLaw::Unit, Correlation::Ind);
        let x = sample_heavy_tailed(&[0.0], &s, 100_000, 21).unwrap();
        let v = x.column(0);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt());
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.03, "{var}");
        let kurt = v.iter().map(|a| (a - mean).powi(4)).sum::<f64>() / n / (var * var);
        // 6 (a - 1)(a - 2) / ((a - 3)(a - 4)) ~ 7.99 for a = 16.5
        assert!(kurt > 3.0, "{kurt}");
    }

    #[test]
    fn heavy_tailed_uses_sigma_root() {
        let s = spec(3, VarianceLaw::Equispaced { lo: 1.0, hi: 4.0 }, Correlation::Ar1 { rho: 0.5 });
        let prepared = PreparedCovariance::new(&s).unwrap();
        let mut rng = sampler_rng(1, 1);
        let cov = prepared.draw(&mut rng);
        let root = cov.sigma_root().unwrap().unwrap().clone();
        assert!((&root * &root - cov.matrix()).abs().max() < 1e-10);
        let x = cov.sample_heavy_tailed(&[0.0; 3], 50_000, &mut rng).unwrap();
        // sample variance of the last coordinate should be near 4
        let c = x.column(2);
        let var = c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64;
        assert!((var - 4.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn signal_injection() {
        let sd = [2.0; 4];
        let base = [0.0; 4];
        let none = inject_signal(&base, &sd, &SignalSpec { beta: 0.0, theta: 3.0 }).unwrap();
        assert_eq!(none, base.to_vec());
        let all = inject_signal(&base, &sd, &SignalSpec { beta: 1.0, theta: 0.5 }).unwrap();
        assert_eq!(all, vec![1.0; 4]);
        assert_eq!(signal_count(0.15, 10), 2);
        assert_eq!(signal_count(0.25, 10), 3);
        assert_eq!(signal_count(0.05, 100), 5);
        let ten = inject_signal(&[0.0; 10], &[1.0; 10], &SignalSpec { beta: 0.15, theta: 1.0 }).unwrap();
        assert_eq!(ten.iter().filter(|&&v| v != 0.0).count(), 2);
        assert!(inject_signal(&base, &[1.0], &SignalSpec { beta: 0.5, theta: 1.0 }).is_err());
    }

    #[test]
    fn correlated_structures_factorize() {
        for corr in [Correlation::Ar1 { rho: 0.6 }, Correlation::Ar1 { rho: 0.3 }, Correlation::Lrd { hurst: 0.625 }] {
            assert!(PreparedCovariance::new(&spec(300, VarianceLaw::Unit, corr)).is_ok());
        }
    }
}
