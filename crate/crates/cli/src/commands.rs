use std::io::Write;
use std::path::{Path, PathBuf};

use hdmt_core::baselines::baseline_statistic;
use hdmt_core::dlrt::{
    dlrt_one_sample, dlrt_two_sample, theoretical_power, Centering, DlrtOptions, TestResult,
};
use hdmt_core::rng::{domain, stream_rng};
use hdmt_core::simharness::{run_grid, Design, ExperimentGrid, Method};
use hdmt_core::Sample;
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::load_grid;
use crate::csvio::{read_sample, read_vector};
use crate::error::CliError;

/// How a single report is printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    /// `name: value` lines.
    #[default]
    Text,
    /// One flat JSON object.
    Json,
    /// A header line and one data line.
    Csv,
}

/// Writes a flat report (a struct of scalars) in the requested format.
pub fn render(report: &impl Serialize, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let value = serde_json::to_value(report).map_err(|e| CliError::input(e.to_string()))?;
    let fields = value
        .as_object()
        .ok_or_else(|| CliError::input("report is not a flat record"))?;
    let plain = |v: &serde_json::Value| match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    match format {
        Format::Json => writeln!(out, "{value}")?,
        Format::Text => {
            for (k, v) in fields {
                writeln!(out, "{k}: {}", plain(v))?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(fields.keys())
                .and_then(|_| w.write_record(fields.values().map(plain)))
                .map_err(|e| CliError::input(e.to_string()))?;
            let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
            out.write_all(&bytes)?;
        }
    }
    Ok(())
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let from_env = || {
        std::env::var("HDMT_THREADS").ok().map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::input(format!("HDMT_THREADS must be a positive integer, got {v:?}")))
        })
    };
    let n = match threads {
        Some(n) => Some(n),
        None => from_env().transpose()?,
    };
    if n == Some(0) {
        return Err(CliError::input("thread count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.unwrap_or(0))
        .build()
        .map_err(|e| CliError::input(format!("cannot start worker threads: {e}")))
}

// ---------------------------------------------------------------- test

#[derive(Debug, Clone, PartialEq)]
pub enum TestInput {
    OneSample { x: PathBuf, mu0: PathBuf },
    TwoSample { x: PathBuf, y: PathBuf },
}

#[derive(Debug, Clone)]
pub struct TestArgs {
    pub input: TestInput,
    pub lag_h: usize,
    pub centering: Centering,
    pub alpha: f64,
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic_raw: f64,
    pub statistic_std: f64,
    pub tau_sq_hat: f64,
    pub p_value: f64,
    pub decision: &'static str,
    pub alpha: f64,
    pub centering: &'static str,
    pub lag_h: usize,
    pub n_scale: u64,
    pub nu: u64,
    pub p: usize,
    pub tau_floored: bool,
}

impl TestReport {
    fn new(r: &TestResult, alpha: f64) -> Self {
        Self {
            statistic_raw: r.statistic_raw,
            statistic_std: r.statistic_std,
            tau_sq_hat: r.tau_sq_hat,
            p_value: r.p_value,
            decision: if r.rejects(alpha) { "reject" } else { "fail to reject" },
            alpha,
            centering: match r.centering {
                Centering::ExactM1 => "exact",
                Centering::Expansion { .. } => "expansion",
            },
            lag_h: r.lag_h,
            n_scale: r.n_scale,
            nu: r.nu,
            p: r.p,
            tau_floored: r.tau_floored,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::input(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn test_report(args: &TestArgs) -> Result<TestReport, CliError> {
    check_alpha(args.alpha)?;
    let opts = DlrtOptions {
        lag_h: args.lag_h,
        centering: args.centering,
    };
    let result = match &args.input {
        TestInput::OneSample { x, mu0 } => {
            let x = read_sample(x)?;
            let mu0 = read_vector(mu0)?;
            if mu0.len() != x.p() {
                return Err(CliError::input(format!(
                    "mu0 has {} entries but the data have p = {} columns",
                    mu0.len(),
                    x.p()
                )));
            }
            dlrt_one_sample(&x, &mu0, &opts)?
        }
        TestInput::TwoSample { x, y } => dlrt_two_sample(&read_sample(x)?, &read_sample(y)?, &opts)?,
    };
    Ok(TestReport::new(&result, args.alpha))
}

pub fn cmd_test(args: &TestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = test_report(args)?;
    render(&report, args.format, out)
}

// ---------------------------------------------------------------- simulate

pub const SIMULATE_COLUMNS: [&str; 14] = [
    "method",
    "tail",
    "structure",
    "rho_or_hurst",
    "n1",
    "n2",
    "p",
    "beta",
    "theta",
    "alpha",
    "replicates",
    "rejection_rate",
    "mc_stderr",
    "seed",
];

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Runs the grid and returns the CSV text.
pub fn simulate_csv(grid: &ExperimentGrid, threads: Option<usize>) -> Result<String, CliError> {
    let rows = thread_pool(threads)?.install(|| run_grid(grid))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let n2 = match grid.design {
        Design::TwoSample => grid.n2,
        Design::OneSample => 0,
    };
    let csv_err = |e: csv::Error| CliError::input(e.to_string());
    w.write_record(SIMULATE_COLUMNS).map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.method.name().to_string(),
            grid.tail.name().to_string(),
            grid.structure.correlation.label().to_string(),
            grid.structure.correlation.parameter().to_string(),
            grid.n1.to_string(),
            n2.to_string(),
            grid.p().to_string(),
            r.beta.to_string(),
            r.theta.to_string(),
            grid.alpha.to_string(),
            r.replicates_used.to_string(),
            r.rejection_rate.to_string(),
            r.mc_stderr.to_string(),
            grid.master_seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::input(e.to_string()))
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut grid = load_grid(&args.config)?;
    if let Some(seed) = args.seed {
        grid.master_seed = seed;
    }
    let text = simulate_csv(&grid, args.threads)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

// ---------------------------------------------------------------- power

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub power: f64,
    pub delta_sq_sum: f64,
    pub p: usize,
    pub tau_sq: f64,
    pub alpha: f64,
}

pub fn cmd_power(
    delta_sq_sum: f64,
    p: usize,
    tau_sq: f64,
    alpha: f64,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let power = theoretical_power(delta_sq_sum, p, tau_sq, alpha)?;
    let report = PowerReport {
        power,
        delta_sq_sum,
        p,
        tau_sq,
        alpha,
    };
    render(&report, format, out)
}

// ---------------------------------------------------------------- calibrate

/// Redraws allowed when a resampled split has a constant coordinate.
const MAX_SPLIT_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone)]
pub struct CalibrateArgs {
    pub data: PathBuf,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub n_boot: usize,
    pub method: Method,
    pub lambda: Option<f64>,
    pub lag_h: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub apply: Option<(PathBuf, PathBuf)>,
    pub n_apply: usize,
    pub format: Format,
}

/// The resampled critical value, and optionally its use on a pair of groups.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub method: &'static str,
    pub critical_value: f64,
    pub alpha: f64,
    pub n_boot: usize,
    pub group_sizes: (usize, usize),
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apply_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apply_rejections: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_rejection_rate: Option<f64>,
}

/// The statistic a method is calibrated on: the standardized DLRT
/// statistic, or the raw baseline statistic.
fn method_statistic(
    method: Method,
    lambda: Option<f64>,
    lag_h: usize,
    x: &Sample,
    y: &Sample,
) -> hdmt_core::Result<f64> {
    match method.baseline_kind(lambda) {
        None => {
            let opts = DlrtOptions {
                lag_h,
                centering: Centering::ExactM1,
            };
            Ok(dlrt_two_sample(x, y, &opts)?.statistic_std)
        }
        Some(kind) => baseline_statistic(x, y, kind),
    }
}

/// Evaluates `stat` on splits drawn by `split`, redrawing degenerate ones.
fn with_split(
    seed: u64,
    path: [u64; 2],
    mut split: impl FnMut(&mut hdmt_core::rng::StreamRng) -> (Sample, Sample),
    stat: impl Fn(&Sample, &Sample) -> hdmt_core::Result<f64>,
) -> Result<f64, CliError> {
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let mut rng = stream_rng(seed, &[path[0], path[1], attempt]);
        let (x, y) = split(&mut rng);
        match stat(&x, &y) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_degenerate() => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(CliError::Degenerate(format!(
        "{MAX_SPLIT_ATTEMPTS} consecutive resampled splits had a constant coordinate"
    )))
}

/// Two disjoint row subsets of sizes `(n1, n2)` drawn without replacement.
fn disjoint_split(
    group: &Sample,
    n1: usize,
    n2: usize,
    rng: &mut hdmt_core::rng::StreamRng,
) -> (Sample, Sample) {
    let rows = sample_indices(rng, group.n(), n1 + n2).into_vec();
    (group.select_rows(&rows[..n1]), group.select_rows(&rows[n1..]))
}

/// The `ceil(n_boot * alpha)`-th largest of `stats`.
pub fn critical_value(stats: &[f64], alpha: f64) -> f64 {
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // The small guard keeps 10000 * 0.05 at 500 despite rounding.
    let rank = ((sorted.len() as f64 * alpha) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn calibrate(args: &CalibrateArgs) -> Result<CalibrationReport, CliError> {
    check_alpha(args.alpha)?;
    if args.n1 < 2 || args.n2 < 2 {
        return Err(CliError::input("n1 and n2 must each be at least 2"));
    }
    if args.n_boot == 0 {
        return Err(CliError::input("n-boot must be at least 1"));
    }
    let group = read_sample(&args.data)?;
    if args.n1 + args.n2 > group.n() {
        return Err(CliError::input(format!(
            "n1 + n2 = {} exceeds the {} rows of {}",
            args.n1 + args.n2,
            group.n(),
            args.data.display()
        )));
    }
    let stat = |x: &Sample, y: &Sample| method_statistic(args.method, args.lambda, args.lag_h, x, y);
    let pool = thread_pool(args.threads)?;

    let stats: Vec<f64> = pool.install(|| {
        (0..args.n_boot as u64)
            .into_par_iter()
            .map(|b| {
                with_split(
                    args.seed,
                    [domain::CALIBRATION, b],
                    |rng| disjoint_split(&group, args.n1, args.n2, rng),
                    stat,
                )
            })
            .collect::<Result<_, _>>()
    })?;
    let critical = critical_value(&stats, args.alpha);

    let mut report = CalibrationReport {
        method: args.method.name(),
        critical_value: critical,
        alpha: args.alpha,
        n_boot: args.n_boot,
        group_sizes: (args.n1, args.n2),
        seed: args.seed,
        apply_evaluations: None,
        apply_rejections: None,
        empirical_rejection_rate: None,
    };

    if let Some((xp, yp)) = &args.apply {
        let rejections = apply(args, xp, yp, &pool, critical, &stat)?;
        report.apply_evaluations = Some(args.n_apply);
        report.apply_rejections = Some(rejections);
        report.empirical_rejection_rate = Some(rejections as f64 / args.n_apply as f64);
    }
    Ok(report)
}

/// Counts how often subsamples of the two groups reach the critical value.
/// When both files hold the same data the two subsamples are disjoint.
fn apply(
    args: &CalibrateArgs,
    xp: &Path,
    yp: &Path,
    pool: &rayon::ThreadPool,
    critical: f64,
    stat: &(impl Fn(&Sample, &Sample) -> hdmt_core::Result<f64> + Sync),
) -> Result<usize, CliError> {
    if args.n_apply == 0 {
        return Err(CliError::input("n-apply must be at least 1"));
    }
    let x = read_sample(xp)?;
    let y = read_sample(yp)?;
    if x.p() != y.p() {
        return Err(CliError::input(format!(
            "apply groups have p = {} and p = {}",
            x.p(),
            y.p()
        )));
    }
    let same = x == y;
    if same && args.n1 + args.n2 > x.n() {
        return Err(CliError::input(format!(
            "n1 + n2 = {} exceeds the {} rows of {}",
            args.n1 + args.n2,
            x.n(),
            xp.display()
        )));
    }
    if !same && (args.n1 > x.n() || args.n2 > y.n()) {
        return Err(CliError::input(format!(
            "cannot draw ({}, {}) rows from groups of {} and {} rows",
            args.n1,
            args.n2,
            x.n(),
            y.n()
        )));
    }
    let hits: Vec<bool> = pool.install(|| {
        (0..args.n_apply as u64)
            .into_par_iter()
            .map(|e| {
                let v = with_split(
                    args.seed,
                    [domain::APPLY, e],
                    |rng| {
                        if same {
                            disjoint_split(&x, args.n1, args.n2, rng)
                        } else {
                            let rx = sample_indices(rng, x.n(), args.n1).into_vec();
                            let ry = sample_indices(rng, y.n(), args.n2).into_vec();
                            (x.select_rows(&rx), y.select_rows(&ry))
                        }
                    },
                    stat,
                )?;
                Ok(v >= critical)
            })
            .collect::<Result<_, CliError>>()
    })?;
    Ok(hits.into_iter().filter(|&h| h).count())
}

pub fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = calibrate(args)?;
    render(&report, args.format, out)
}
