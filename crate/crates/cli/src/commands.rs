use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use kscan::{
    accuracy_curve_export, build_sorted_matrix, generate_synthetic, load_csv, logarithmic_schedule, naive_search,
    optimize, Dataset, FoldAssignment, KSchedule, KSearchReport, PhaseTiming, Scalar,
};
use serde::Serialize;

use crate::config::{BenchArgs, Cli, Command, CurvesArgs, DataSource, Mode, OptimizeArgs, Precision, RunConfig};
use crate::error::CliError;

/// Fold counts swept by `curves`.
pub const CURVE_FOLD_COUNTS: [usize; 4] = [3, 5, 10, 20];

pub fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Optimize(args) => {
            let cfg = RunConfig::from_args(&args.data, 1)?;
            init_threads(&cfg);
            match cfg.precision {
                Precision::F64 => cmd_optimize::<f64>(&cfg, &args, &mut out),
                Precision::F32 => cmd_optimize::<f32>(&cfg, &args, &mut out),
            }
        }
        Command::Bench(args) => {
            let cfg = RunConfig::from_args(&args.data, args.repeat)?;
            init_threads(&cfg);
            match cfg.precision {
                Precision::F64 => cmd_bench::<f64>(&cfg, &args, &mut out),
                Precision::F32 => cmd_bench::<f32>(&cfg, &args, &mut out),
            }
        }
        Command::Curves(args) => {
            let cfg = RunConfig::from_args(&args.data, args.repeat)?;
            init_threads(&cfg);
            match cfg.precision {
                Precision::F64 => cmd_curves::<f64>(&cfg, &args, &mut out),
                Precision::F32 => cmd_curves::<f32>(&cfg, &args, &mut out),
            }
        }
    }
}

fn init_threads(cfg: &RunConfig) {
    if let Some(n) = cfg.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn load_dataset<T: Scalar>(cfg: &RunConfig) -> Result<Dataset<T>, CliError> {
    Ok(match &cfg.source {
        DataSource::Csv { path, label_column } => load_csv(path, label_column)?,
        DataSource::Synthetic(spec) => generate_synthetic(spec.n, spec.d, spec.s, spec.spread, cfg.seed)?,
    })
}

/// Runs one mode on prepared data. Only the search itself is timed.
pub fn run_mode<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    cfg: &RunConfig,
    mode: Mode,
) -> Result<KSearchReport, CliError> {
    let k_max = folds.k_max();
    Ok(match mode {
        Mode::Sweep => optimize(dataset, folds, cfg.metric, cfg.policy, cfg.memory_budget)?.report,
        Mode::NaiveFull => naive_search(dataset, folds, &KSchedule::full(k_max), cfg.metric, cfg.policy)?,
        Mode::NaiveLog => naive_search(dataset, folds, &logarithmic_schedule(k_max), cfg.metric, cfg.policy)?,
    })
}

/// Fastest of `repeat` runs.
fn best_of<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    cfg: &RunConfig,
    mode: Mode,
) -> Result<KSearchReport, CliError> {
    let mut best = run_mode(dataset, folds, cfg, mode)?;
    for _ in 1..cfg.repeat {
        let next = run_mode(dataset, folds, cfg, mode)?;
        if next.timing.total < best.timing.total {
            best = next;
        }
    }
    Ok(best)
}

fn write_json<S: Serialize>(value: &S, path: Option<&Path>, out: &mut impl Write) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_optimize<T: Scalar>(cfg: &RunConfig, args: &OptimizeArgs, out: &mut impl Write) -> Result<(), CliError> {
    let dataset: Dataset<T> = load_dataset(cfg)?;
    let folds = FoldAssignment::stratified(&dataset, cfg.folds, cfg.seed)?;
    let report = run_mode(&dataset, &folds, cfg, args.mode)?;

    if let Some(path) = &args.dump_matrix {
        if args.mode != Mode::Sweep {
            return Err(CliError::Usage("--dump-matrix requires --mode sweep".into()));
        }
        let matrix = build_sorted_matrix(&dataset, &folds, cfg.metric, cfg.memory_budget)?;
        matrix.write_to(io::BufWriter::new(fs::File::create(path)?))?;
    }
    if let Some(path) = &args.curve {
        accuracy_curve_export(&report, path)?;
    }

    let t = report.timing;
    writeln!(out, "k* = {}", report.k_star)?;
    writeln!(out, "best k per fold: {:?}", report.best_k_per_fold)?;
    match args.mode {
        Mode::Sweep => writeln!(
            out,
            "timing: distance {:.6}s, sort {:.6}s, sweep {:.6}s, total {:.6}s",
            t.distance, t.sort, t.sweep, t.total
        )?,
        _ => writeln!(out, "timing: total {:.6}s", t.total)?,
    }
    write_json(&report, args.output.as_deref(), out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetDescriptor {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub f: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTiming {
    pub mode: Mode,
    pub seconds: f64,
    pub phases: PhaseTiming,
    pub k_star: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Speedup {
    pub mode: Mode,
    /// `seconds(mode) / seconds(sweep)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub dataset: DatasetDescriptor,
    pub repeat: usize,
    pub modes: Vec<ModeTiming>,
    pub speedups: Vec<Speedup>,
    pub k_star_agreement: bool,
}

/// Times every mode on the same data and folds after checking that they
/// agree: identical curves wherever both evaluated a k, and identical k*
/// between modes that evaluate the full range.
pub fn bench<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    cfg: &RunConfig,
    modes: &[Mode],
) -> Result<BenchResult, CliError> {
    if modes.len() < 2 {
        return Err(CliError::Usage("bench needs at least two modes".into()));
    }
    let runs = modes
        .iter()
        .map(|&m| best_of(dataset, folds, cfg, m).map(|r| (m, r)))
        .collect::<Result<Vec<_>, _>>()?;

    check_agreement(&runs)?;

    let sweep_seconds = runs.iter().find(|(m, _)| *m == Mode::Sweep).map(|(_, r)| r.timing.total);
    let speedups = match sweep_seconds {
        Some(base) => runs
            .iter()
            .filter(|(m, _)| *m != Mode::Sweep)
            .map(|(m, r)| Speedup {
                mode: *m,
                ratio: r.timing.total / base,
            })
            .collect(),
        None => Vec::new(),
    };
    let k_star_agreement = runs.windows(2).all(|w| w[0].1.k_star == w[1].1.k_star);

    Ok(BenchResult {
        dataset: DatasetDescriptor {
            n: dataset.n_rows(),
            d: dataset.n_features(),
            s: dataset.n_classes(),
            f: folds.fold_count(),
        },
        repeat: cfg.repeat,
        modes: runs
            .iter()
            .map(|(m, r)| ModeTiming {
                mode: *m,
                seconds: r.timing.total,
                phases: r.timing,
                k_star: r.k_star,
            })
            .collect(),
        speedups,
        k_star_agreement,
    })
}

fn check_agreement(runs: &[(Mode, KSearchReport)]) -> Result<(), CliError> {
    for (i, (ma, a)) in runs.iter().enumerate() {
        for (mb, b) in &runs[i + 1..] {
            for p in &b.curve {
                if let Some(q) = a.curve.iter().find(|q| q.k == p.k) {
                    if q != p {
                        return Err(CliError::Agreement(format!("{ma} and {mb} differ at k = {}: {q:?} vs {p:?}", p.k)));
                    }
                }
            }
            let both_full = *ma != Mode::NaiveLog && *mb != Mode::NaiveLog;
            if both_full && a.k_star != b.k_star {
                return Err(CliError::Agreement(format!("k* is {} for {ma} but {} for {mb}", a.k_star, b.k_star)));
            }
        }
    }
    Ok(())
}

fn cmd_bench<T: Scalar>(cfg: &RunConfig, args: &BenchArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.mode.len() < 2 {
        return Err(CliError::Usage("bench needs at least two modes".into()));
    }
    let dataset: Dataset<T> = load_dataset(cfg)?;
    let folds = FoldAssignment::stratified(&dataset, cfg.folds, cfg.seed)?;
    let result = bench(&dataset, &folds, cfg, &args.mode)?;
    for m in &result.modes {
        writeln!(out, "{:<10} {:>12.6}s  k* = {}", m.mode.to_string(), m.seconds, m.k_star)?;
    }
    for s in &result.speedups {
        writeln!(out, "speedup of sweep over {}: {:.1}x", s.mode, s.ratio)?;
    }
    write_json(&result, args.output.as_deref(), out)
}

/// Sweeps once per fold count in [`CURVE_FOLD_COUNTS`], writing
/// `curve_f<F>.csv` per count and `summary.csv` with `f,time_seconds`.
pub fn curves<T: Scalar>(dataset: &Dataset<T>, cfg: &RunConfig, dir: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    for f in CURVE_FOLD_COUNTS {
        let folds = FoldAssignment::stratified(dataset, f, cfg.seed)?;
        let report = best_of(dataset, &folds, cfg, Mode::Sweep)?;
        accuracy_curve_export(&report, dir.join(format!("curve_f{f}.csv")))?;
        rows.push((f, report.timing.total));
    }
    let mut summary = String::from("f,time_seconds\n");
    for (f, t) in &rows {
        writeln!(summary, "{f},{t:.6}").unwrap();
    }
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(rows)
}

fn cmd_curves<T: Scalar>(cfg: &RunConfig, args: &CurvesArgs, out: &mut impl Write) -> Result<(), CliError> {
    let dataset: Dataset<T> = load_dataset(cfg)?;
    for (f, t) in curves(&dataset, cfg, &args.output)? {
        writeln!(out, "f = {f:>2}: {t:.6}s")?;
    }
    Ok(())
}
