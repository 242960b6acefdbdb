//! The `hdmt` command line: test user data, run simulation grids, compute
//! asymptotic power and calibrate critical values by resampling.
//!
//! Exit codes: 0 on success, 2 for input errors, 3 for degenerate data.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdmt_core::dlrt::{Centering, DEFAULT_EXPANSION_K, DEFAULT_LAG_H};
use hdmt_core::simharness::Method;

use crate::commands::{
    cmd_calibrate, cmd_power, cmd_simulate, cmd_test, CalibrateArgs, Format, SimulateArgs,
    TestArgs, TestInput,
};
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hdmt", version, about = "Diagonal likelihood ratio tests for high-dimensional means")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a mean vector (one sample) or the difference of two means.
    Test(TestCmd),
    /// Run a simulation grid and write one CSV row per (method, beta).
    Simulate(SimulateCmd),
    /// Asymptotic power of the level-alpha test.
    Power(PowerCmd),
    /// Resample one group to calibrate a critical value.
    Calibrate(CalibrateCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenteringArg {
    /// Center with the exact null mean and a lag-window variance.
    Exact,
    /// Center with the truncated series and variance 2.
    Expansion,
}

#[derive(Debug, Args)]
pub struct OutputFlags {
    /// Print one flat JSON object.
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    /// Print a CSV header and one row.
    #[arg(long)]
    pub csv: bool,
}

impl OutputFlags {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Text
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("design").required(true).args(["one_sample", "two_sample"]))]
pub struct TestCmd {
    /// Observations (rows) of a single sample.
    #[arg(long, value_name = "X.csv", requires = "mu0")]
    pub one_sample: Option<PathBuf>,
    /// Hypothesized mean, as one row or one column.
    #[arg(long, value_name = "MU.csv")]
    pub mu0: Option<PathBuf>,
    /// Observations of the two samples.
    #[arg(long, num_args = 2, value_names = ["X.csv", "Y.csv"], conflicts_with = "mu0")]
    pub two_sample: Option<Vec<PathBuf>>,
    /// Lag-window size for the variance estimate.
    #[arg(long, default_value_t = DEFAULT_LAG_H)]
    pub lag_h: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub centering: CenteringArg,
    /// Terms of the expansion used with `--centering expansion`.
    #[arg(long, default_value_t = DEFAULT_EXPANSION_K)]
    pub k: u32,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// TOML file describing the grid.
    #[arg(long, value_name = "GRID.toml")]
    pub config: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long, value_name = "RESULTS.csv")]
    pub out: Option<PathBuf>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to HDMT_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PowerCmd {
    /// Sum of squared standardized mean differences.
    #[arg(long, allow_negative_numbers = true)]
    pub delta_sq_sum: f64,
    #[arg(long)]
    pub p: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_sq: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputFlags,
}

#[derive(Debug, Args)]
pub struct CalibrateCmd {
    /// Observations of a single group to resample.
    #[arg(long, value_name = "GROUP.csv")]
    pub data: PathBuf,
    #[arg(long)]
    pub n1: usize,
    #[arg(long)]
    pub n2: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_boot: usize,
    /// dlrt, diag_hotelling, unscaled or regularized.
    #[arg(long, default_value = "dlrt", value_parser = parse_method)]
    pub method: Method,
    /// Ridge for the regularized statistic; default trace(S)/p.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LAG_H)]
    pub lag_h: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; falls back to HDMT_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Evaluate the calibrated test on subsamples of two groups.
    #[arg(long, num_args = 2, value_names = ["X.csv", "Y.csv"])]
    pub apply: Option<Vec<PathBuf>>,
    /// Number of subsample pairs evaluated by `--apply`.
    #[arg(long, default_value_t = 1000)]
    pub n_apply: usize,
    #[command(flatten)]
    pub output: OutputFlags,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        format!("unknown method {s:?}; expected dlrt, diag_hotelling, unscaled or regularized")
    })
}

fn pair(paths: Vec<PathBuf>) -> (PathBuf, PathBuf) {
    let mut it = paths.into_iter();
    let a = it.next().expect("clap enforces two values");
    let b = it.next().expect("clap enforces two values");
    (a, b)
}

impl TestCmd {
    pub fn into_args(self) -> TestArgs {
        let input = match (self.one_sample, self.mu0, self.two_sample) {
            (Some(x), Some(mu0), _) => TestInput::OneSample { x, mu0 },
            (_, _, Some(files)) => {
                let (x, y) = pair(files);
                TestInput::TwoSample { x, y }
            }
            _ => unreachable!("clap enforces the design group"),
        };
        TestArgs {
            input,
            lag_h: self.lag_h,
            centering: match self.centering {
                CenteringArg::Exact => Centering::ExactM1,
                CenteringArg::Expansion => Centering::Expansion { k: self.k },
            },
            alpha: self.alpha,
            format: self.output.format(),
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Test(cmd) => cmd_test(&cmd.into_args(), out),
        Command::Simulate(cmd) => cmd_simulate(
            &SimulateArgs {
                config: cmd.config,
                out: cmd.out,
                seed: cmd.seed,
                threads: cmd.threads,
            },
            out,
        ),
        Command::Power(cmd) => cmd_power(
            cmd.delta_sq_sum,
            cmd.p,
            cmd.tau_sq,
            cmd.alpha,
            cmd.output.format(),
            out,
        ),
        Command::Calibrate(cmd) => {
            let format = cmd.output.format();
            cmd_calibrate(
                &CalibrateArgs {
                    data: cmd.data,
                    n1: cmd.n1,
                    n2: cmd.n2,
                    alpha: cmd.alpha,
                    n_boot: cmd.n_boot,
                    method: cmd.method,
                    lambda: cmd.lambda,
                    lag_h: cmd.lag_h,
                    seed: cmd.seed,
                    threads: cmd.threads,
                    apply: cmd.apply.map(pair),
                    n_apply: cmd.n_apply,
                    format,
                },
                out,
            )
        }
    }
}
