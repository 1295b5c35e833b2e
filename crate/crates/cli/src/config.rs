use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kscan::{LabelColumn, Metric, TieBreakPolicy, DEFAULT_MEMORY_BUDGET};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kscan", version, about = "Find the best k for kNN classification in one cross-validated sweep")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every k and report k* (or run a naive baseline with --mode).
    Optimize(OptimizeArgs),
    /// Time several modes on identical data and folds.
    Bench(BenchArgs),
    /// Sweep with 3, 5, 10 and 20 folds and write one curve per fold count.
    Curves(CurvesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    /// Gaussian mixture instead of a file: n,d,s,spread.
    #[arg(long, value_name = "N,D,S,SPREAD")]
    pub synthetic: Option<SyntheticSpec>,
    /// Label column, by header name or zero-based index.
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
    pub metric: Metric,
    #[arg(long, default_value = "smallest_code", value_parser = parse_policy)]
    pub tie_policy: TieBreakPolicy,
    /// Byte budget for the sorted matrix; accepts K/M/G suffixes (powers of 1024).
    #[arg(long, default_value_t = DEFAULT_MEMORY_BUDGET, value_parser = parse_bytes)]
    pub memory_budget: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Mode::Sweep)]
    pub mode: Mode,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Accuracy curve CSV path.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Binary dump of the sorted distance matrix (sweep mode only).
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Modes to compare, comma separated (at least two).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sweep,naive-full")]
    pub mode: Vec<Mode>,
    /// Runs per mode; the minimum time is reported.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// JSON result path; printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Directory receiving curve_f<F>.csv files and summary.csv.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sweep,
    NaiveFull,
    NaiveLog,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sweep => "sweep",
            Mode::NaiveFull => "naive-full",
            Mode::NaiveLog => "naive-log",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub spread: f64,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [n, d, c, spread] = parts.as_slice() else {
            return Err(format!("expected n,d,s,spread, got {s:?}"));
        };
        let int = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(SyntheticSpec {
            n: int(n)?,
            d: int(d)?,
            s: int(c)?,
            spread: spread.parse().map_err(|e| format!("{spread:?}: {e}"))?,
        })
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: kscan::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<TieBreakPolicy, String> {
    s.parse().map_err(|e: kscan::Error| e.to_string())
}

fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, shift) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 10),
        Some('M') => (&s[..s.len() - 1], 20),
        Some('G') => (&s[..s.len() - 1], 30),
        _ => (s, 0),
    };
    let v: u64 = digits.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    v.checked_mul(1 << shift).ok_or_else(|| format!("{s:?} overflows"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label_column: LabelColumn },
    Synthetic(SyntheticSpec),
}

/// Validated settings shared by all subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub folds: usize,
    pub seed: u64,
    pub metric: Metric,
    pub policy: TieBreakPolicy,
    pub memory_budget: u64,
    pub threads: Option<usize>,
    pub precision: Precision,
    pub repeat: usize,
}

impl RunConfig {
    pub fn from_args(data: &DataArgs, repeat: usize) -> Result<Self, CliError> {
        if data.folds < 2 {
            return Err(kscan::Error::BadFoldCount(data.folds).into());
        }
        if repeat == 0 {
            return Err(CliError::Usage("--repeat must be at least 1".into()));
        }
        if data.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        let source = match (&data.input, data.synthetic) {
            (Some(path), None) => DataSource::Csv {
                path: path.clone(),
                label_column: LabelColumn::from(data.label_col.as_str()),
            },
            (None, Some(spec)) => {
                if spec.s < 2 || spec.n < spec.s || spec.d == 0 || spec.spread.is_nan() || spec.spread <= 0.0 {
                    return Err(kscan::Error::BadParams(format!(
                        "synthetic spec needs n >= s >= 2, d >= 1, spread > 0 (got {spec:?})"
                    ))
                    .into());
                }
                if data.folds > spec.n {
                    return Err(kscan::Error::TooManyFolds {
                        folds: data.folds,
                        rows: spec.n,
                    }
                    .into());
                }
                DataSource::Synthetic(spec)
            }
            _ => return Err(CliError::Usage("exactly one of --input or --synthetic is required".into())),
        };
        Ok(Self {
            source,
            folds: data.folds,
            seed: data.seed,
            metric: data.metric,
            policy: data.tie_policy,
            memory_budget: data.memory_budget,
            threads: data.threads,
            precision: data.precision,
            repeat,
        })
    }
}
