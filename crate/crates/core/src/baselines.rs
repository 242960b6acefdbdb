//! Hotelling-type comparison statistics with permutation calibration.
//!
//! All three replace `S^{-1}` in `n1 n2 / N (xbar - ybar)' S^{-1} (xbar - ybar)`:
//! by `diag(S)^{-1}`, by the identity, or by `(S + lambda I)^{-1}`. None of
//! their published asymptotic nulls are reproduced here; every baseline is
//! calibrated by re-splitting the pooled rows, so its size is nominal by
//! construction and only power is comparable.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream_rng};
use crate::sample::{is_negligible_spread, summarize, Sample};

/// Smallest number of permutations accepted by [`permutation_test`].
pub const MIN_PERMUTATIONS: usize = 99;
/// Redraws allowed per permutation when a split is degenerate.
const MAX_REDRAWS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    DiagHotelling,
    Unscaled,
    /// `lambda = None` uses `trace(S) / p` of the data at hand.
    Regularized { lambda: Option<f64> },
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::DiagHotelling => "diag_hotelling",
            BaselineKind::Unscaled => "unscaled",
            BaselineKind::Regularized { .. } => "regularized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationResult {
    pub statistic: f64,
    /// `(1 + #{permuted >= observed}) / (1 + n_perms)`.
    pub perm_p_value: f64,
    pub n_perms: usize,
    pub seed: u64,
}

fn check_pair(x: &Sample, y: &Sample) -> Result<()> {
    if x.p() != y.p() {
        return Err(Error::DimensionMismatch {
            what: format!("samples have p = {} and p = {}", x.p(), y.p()),
        });
    }
    if x.n() < 2 || y.n() < 2 {
        return Err(Error::InvalidSample {
            what: format!("baselines need n1, n2 >= 2, got ({}, {})", x.n(), y.n()),
        });
    }
    Ok(())
}

pub fn baseline_statistic(x: &Sample, y: &Sample, kind: BaselineKind) -> Result<f64> {
    check_pair(x, y)?;
    let (n1, n2) = (x.n(), y.n());
    let total = (n1 + n2) as f64;
    let scale = (n1 * n2) as f64 / total;
    let p = x.p();
    let mut diff = DVector::zeros(p);
    let mut pooled_var = DVector::zeros(p);
    for j in 0..p {
        let a = summarize(x.column(j));
        let b = summarize(y.column(j));
        diff[j] = a.mean - b.mean;
        let ss = a.sum_sq + b.sum_sq;
        pooled_var[j] = if is_negligible_spread(ss, a.max_abs.max(b.max_abs), n1 + n2) {
            0.0
        } else {
            ss / (total - 2.0)
        };
    }
    match kind {
        BaselineKind::DiagHotelling => {
            let mut acc = 0.0;
            for j in 0..p {
                if pooled_var[j] == 0.0 {
                    return Err(Error::DegenerateVariance { coordinate: j });
                }
                acc += diff[j] * diff[j] / pooled_var[j];
            }
            Ok(scale * acc)
        }
        BaselineKind::Unscaled => Ok(scale * diff.norm_squared()),
        BaselineKind::Regularized { lambda } => {
            let lambda = match lambda {
                Some(l) if l.is_finite() && l > 0.0 => l,
                Some(l) => return Err(Error::domain(format!("lambda must be positive, got {l}"))),
                None => {
                    let l = pooled_var.sum() / p as f64;
                    if !(l > 0.0) {
                        return Err(Error::DegenerateVariance { coordinate: 0 });
                    }
                    l
                }
            };
            Ok(scale * regularized_quadratic_form(x, y, &diff, lambda)?)
        }
    }
}

/// `d' (S + lambda I)^{-1} d` through the N x N Gram matrix of the centered
/// rows, so the cost is O(N^2 p) instead of O(p^3):
///
/// ```text
/// S = Z'Z / c,  c = N - 2
/// (S + lambda I)^{-1} = (I - Z' (lambda c I + Z Z')^{-1} Z) / lambda
/// ```
fn regularized_quadratic_form(x: &Sample, y: &Sample, diff: &DVector<f64>, lambda: f64) -> Result<f64> {
    let centered = |s: &Sample| {
        let mut m = s.matrix().clone();
        for mut col in m.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        m
    };
    let (zx, zy) = (centered(x), centered(y));
    let (n1, n2) = (x.n(), y.n());
    let total = n1 + n2;
    let mut z = DMatrix::zeros(total, x.p());
    z.rows_mut(0, n1).copy_from(&zx);
    z.rows_mut(n1, n2).copy_from(&zy);
    let c = (total - 2) as f64;
    let mut gram = &z * z.transpose();
    for i in 0..total {
        gram[(i, i)] += lambda * c;
    }
    let zd = &z * diff;
    let chol = gram.cholesky().ok_or_else(|| Error::Factorization {
        what: "regularized Gram matrix is not positive definite".into(),
    })?;
    let solved = chol.solve(&zd);
    Ok((diff.norm_squared() - zd.dot(&solved)) / lambda)
}

/// Two-sample permutation test: the pooled rows are re-split into groups of
/// the original sizes `n_perms` times. Permutation `i` draws from its own
/// stream derived from `(seed, i)`, so the result does not depend on
/// scheduling.
pub fn permutation_test(
    x: &Sample,
    y: &Sample,
    kind: BaselineKind,
    n_perms: usize,
    seed: u64,
) -> Result<PermutationResult> {
    if n_perms < MIN_PERMUTATIONS {
        return Err(Error::domain(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {n_perms}"
        )));
    }
    let observed = baseline_statistic(x, y, kind)?;
    let pooled = x.stack(y)?;
    let (n1, total) = (x.n(), x.n() + y.n());
    let tolerance = 1e-12 * observed.abs();

    let exceed = (0..n_perms as u64)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            for attempt in 0..MAX_REDRAWS {
                let mut rng = stream_rng(seed, &[domain::PERMUTATION, i, attempt]);
                let chosen = sample_indices(&mut rng, total, total).into_vec();
                let (first, second) = chosen.split_at(n1);
                let a = pooled.select_rows(first);
                let b = pooled.select_rows(second);
                match baseline_statistic(&a, &b, kind) {
                    Ok(stat) => return Ok(stat >= observed - tolerance),
                    Err(e) if e.is_degenerate() => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::RetriesExhausted {
                attempts: MAX_REDRAWS as usize,
                what: format!("permutation {i} kept producing degenerate splits"),
            })
        })
        .try_fold(|| 0usize, |acc, hit| hit.map(|h| acc + usize::from(h)))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    Ok(PermutationResult {
        statistic: observed,
        perm_p_value: (1 + exceed) as f64 / (1 + n_perms) as f64,
        n_perms,
        seed,
    })
}
