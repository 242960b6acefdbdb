//! Replicated experiments: empirical size and power over a grid of signal
//! sparsities.
//!
//! Replicate `r` of a grid always draws its data from the stream
//! `(master_seed, r, attempt)`, independent of the sparsity level, so the
//! cells of a power curve share their noise (common random numbers) and the
//! results are the same for any thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{permutation_test, BaselineKind, MIN_PERMUTATIONS};
use crate::datagen::{inject_signal, Covariance, CovarianceSpec, PreparedCovariance, SignalSpec};
use crate::dlrt::{dlrt_one_sample, dlrt_two_sample, Centering, DlrtOptions, TestResult};
use crate::error::{Error, Result};
use crate::rng::{domain, stream_rng, StreamRng};
use crate::sample::Sample;

/// Fresh datasets tried per replicate before giving up on degenerate draws.
pub const MAX_DATASET_ATTEMPTS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dlrt,
    DiagHotelling,
    Unscaled,
    Regularized,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dlrt => "dlrt",
            Method::DiagHotelling => "diag_hotelling",
            Method::Unscaled => "unscaled",
            Method::Regularized => "regularized",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.replace('-', "_").as_str() {
            "dlrt" => Some(Method::Dlrt),
            "diag_hotelling" | "diag" | "sd" => Some(Method::DiagHotelling),
            "unscaled" | "cq" => Some(Method::Unscaled),
            "regularized" | "rht" => Some(Method::Regularized),
            _ => None,
        }
    }

    pub fn baseline_kind(&self, lambda: Option<f64>) -> Option<BaselineKind> {
        match self {
            Method::Dlrt => None,
            Method::DiagHotelling => Some(BaselineKind::DiagHotelling),
            Method::Unscaled => Some(BaselineKind::Unscaled),
            Method::Regularized => Some(BaselineKind::Regularized { lambda }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Normal,
    DoublePareto,
}

impl Tail {
    pub fn name(&self) -> &'static str {
        match self {
            Tail::Normal => "normal",
            Tail::DoublePareto => "double_pareto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    TwoSample,
    /// `n1` observations tested against `mu0 = 0`; `n2` is ignored.
    OneSample,
}

/// `{0, 0.05, ..., 0.5}`.
pub fn default_betas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub design: Design,
    pub n1: usize,
    pub n2: usize,
    pub structure: CovarianceSpec,
    pub betas: Vec<f64>,
    pub theta: f64,
    pub tail: Tail,
    pub replicates: usize,
    pub alpha: f64,
    pub lag_h: usize,
    pub centering: Centering,
    pub methods: Vec<Method>,
    /// Permutations per replicate for the baselines.
    pub n_perms: usize,
    /// Regularization for [`Method::Regularized`]; `None` is `trace(S) / p`.
    pub lambda: Option<f64>,
    pub master_seed: u64,
}

impl ExperimentGrid {
    /// Two-sample normal-data DLRT grid under the null with 2000 replicates.
    pub fn new(n1: usize, n2: usize, structure: CovarianceSpec) -> Self {
        Self {
            design: Design::TwoSample,
            n1,
            n2,
            structure,
            betas: vec![0.0],
            theta: 0.0,
            tail: Tail::Normal,
            replicates: 2000,
            alpha: 0.05,
            lag_h: crate::dlrt::DEFAULT_LAG_H,
            centering: Centering::ExactM1,
            methods: vec![Method::Dlrt],
            n_perms: 199,
            lambda: None,
            master_seed: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.structure.p
    }

    pub fn validate(&self) -> Result<()> {
        self.structure.validate()?;
        if self.replicates == 0 {
            return Err(Error::domain("replicates must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.methods.is_empty() {
            return Err(Error::domain("no methods selected"));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::domain("betas must be a non-empty list within [0, 1]"));
        }
        if !self.theta.is_finite() {
            return Err(Error::domain("theta must be finite"));
        }
        if self.n1 < 2 || (self.design == Design::TwoSample && self.n2 < 2) {
            return Err(Error::domain("each sample needs at least 2 observations"));
        }
        if self.lag_h >= self.p() {
            return Err(Error::domain(format!(
                "lag window h = {} needs h < p = {}",
                self.lag_h,
                self.p()
            )));
        }
        let has_baseline = self.methods.iter().any(|m| *m != Method::Dlrt);
        if has_baseline && self.design == Design::OneSample {
            return Err(Error::domain("baseline methods are two-sample only"));
        }
        if has_baseline && self.n_perms < MIN_PERMUTATIONS {
            return Err(Error::domain(format!(
                "baselines need at least {MIN_PERMUTATIONS} permutations"
            )));
        }
        Ok(())
    }

    fn dlrt_options(&self) -> DlrtOptions {
        DlrtOptions {
            lag_h: self.lag_h,
            centering: self.centering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub method: Method,
    pub beta: f64,
    /// The effect size used; 0 when `beta = 0`.
    pub theta: f64,
    pub rejection_rate: f64,
    /// `sqrt(r (1 - r) / replicates)`.
    pub mc_stderr: f64,
    pub replicates_used: usize,
    /// Datasets regenerated because a coordinate had zero variance.
    pub retries: usize,
}

/// One generated dataset.
struct Dataset {
    x: Sample,
    y: Option<Sample>,
}

fn draw<R: Rng + ?Sized>(
    tail: Tail,
    cov: &Covariance<'_>,
    mu: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    match tail {
        Tail::Normal => cov.sample_normal(mu, n, rng),
        Tail::DoublePareto => cov.sample_heavy_tailed(mu, n, rng),
    }
}

fn generate<R: Rng + ?Sized>(
    grid: &ExperimentGrid,
    cov: &Covariance<'_>,
    signal: &SignalSpec,
    rng: &mut R,
) -> Result<Dataset> {
    let zero = vec![0.0; grid.p()];
    let shifted = inject_signal(&zero, cov.sd(), signal)?;
    match grid.design {
        Design::OneSample => Ok(Dataset {
            x: draw(grid.tail, cov, &shifted, grid.n1, rng)?,
            y: None,
        }),
        Design::TwoSample => {
            let x = draw(grid.tail, cov, &zero, grid.n1, rng)?;
            let y = draw(grid.tail, cov, &shifted, grid.n2, rng)?;
            Ok(Dataset { x, y: Some(y) })
        }
    }
}

fn run_dlrt(grid: &ExperimentGrid, data: &Dataset) -> Result<TestResult> {
    let opts = grid.dlrt_options();
    match &data.y {
        Some(y) => dlrt_two_sample(&data.x, y, &opts),
        None => dlrt_one_sample(&data.x, &vec![0.0; grid.p()], &opts),
    }
}

/// Runs `body` on a fresh dataset for replicate `rep`, regenerating on
/// degenerate variance. Returns the body's value and the number of retries.
fn with_dataset<T>(
    grid: &ExperimentGrid,
    prepared: &PreparedCovariance,
    signal: &SignalSpec,
    rep: usize,
    mut body: impl FnMut(&Dataset, &mut StreamRng) -> Result<T>,
) -> Result<(T, usize)> {
    for attempt in 0..MAX_DATASET_ATTEMPTS {
        let mut rng = stream_rng(grid.master_seed, &[domain::DATASET, rep as u64, attempt]);
        let cov = prepared.draw(&mut rng);
        let outcome = generate(grid, &cov, signal, &mut rng).and_then(|d| body(&d, &mut rng));
        match outcome {
            Ok(v) => return Ok((v, attempt as usize)),
            Err(e) if e.is_degenerate() => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted {
        attempts: MAX_DATASET_ATTEMPTS as usize,
        what: format!("replicate {rep} kept producing constant coordinates"),
    })
}

/// Empirical rejection rates for every (method, beta) cell of the grid.
///
/// Rows are ordered by method (as listed in the grid), then by beta.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<ExperimentRow>> {
    grid.validate()?;
    let prepared = PreparedCovariance::new(&grid.structure)?;
    let n_methods = grid.methods.len();
    let cells: Vec<(usize, usize)> = (0..grid.betas.len())
        .flat_map(|b| (0..grid.replicates).map(move |r| (b, r)))
        .collect();

    let outcomes: Vec<(usize, Vec<bool>, usize)> = cells
        .par_iter()
        .map(|&(b_idx, rep)| {
            let signal = SignalSpec {
                beta: grid.betas[b_idx],
                theta: grid.theta,
            };
            let (rejections, retries) = with_dataset(grid, &prepared, &signal, rep, |data, rng| {
                grid.methods
                    .iter()
                    .map(|method| match method.baseline_kind(grid.lambda) {
                        None => Ok(run_dlrt(grid, data)?.rejects(grid.alpha)),
                        Some(kind) => {
                            let y = data.y.as_ref().expect("baselines are two-sample");
                            let seed = rng.random::<u64>();
                            let res = permutation_test(&data.x, y, kind, grid.n_perms, seed)?;
                            Ok(res.perm_p_value <= grid.alpha)
                        }
                    })
                    .collect::<Result<Vec<bool>>>()
            })?;
            Ok((b_idx, rejections, retries))
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![vec![0usize; n_methods]; grid.betas.len()];
    let mut retries = vec![0usize; grid.betas.len()];
    for (b_idx, rejections, r) in outcomes {
        retries[b_idx] += r;
        for (m, hit) in rejections.into_iter().enumerate() {
            counts[b_idx][m] += usize::from(hit);
        }
    }

    let reps = grid.replicates as f64;
    let mut rows = Vec::with_capacity(n_methods * grid.betas.len());
    for (m, method) in grid.methods.iter().enumerate() {
        for (b_idx, &beta) in grid.betas.iter().enumerate() {
            let rate = counts[b_idx][m] as f64 / reps;
            rows.push(ExperimentRow {
                method: *method,
                beta,
                theta: if beta == 0.0 { 0.0 } else { grid.theta },
                rejection_rate: rate,
                mc_stderr: (rate * (1.0 - rate) / reps).sqrt(),
                replicates_used: grid.replicates,
                retries: retries[b_idx],
            });
        }
    }
    Ok(rows)
}

/// Standardized DLRT statistics of every null replicate, in replicate order.
pub fn null_distribution_snapshot(grid: &ExperimentGrid) -> Result<Vec<f64>> {
    grid.validate()?;
    if grid.betas.iter().any(|&b| b != 0.0) {
        return Err(Error::domain("the null snapshot requires beta = 0"));
    }
    let prepared = PreparedCovariance::new(&grid.structure)?;
    let null = SignalSpec {
        beta: 0.0,
        theta: 0.0,
    };
    (0..grid.replicates)
        .into_par_iter()
        .map(|rep| {
            with_dataset(grid, &prepared, &null, rep, |data, _| Ok(run_dlrt(grid, data)?.statistic_std))
                .map(|(v, _)| v)
        })
        .collect()
}
