//! Matrix build, sweep and selection chained together with phase timings.

use std::time::Instant;

use crate::dataset::{Dataset, FoldAssignment};
use crate::distance::{build_sorted_matrix_timed, Metric};
use crate::error::Result;
use crate::report::{select_k, KSearchReport};
use crate::scalar::Scalar;
use crate::sweep::{sweep, AccuracyMatrix, TieBreakPolicy};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub report: KSearchReport,
    pub accuracy: AccuracyMatrix,
}

/// Evaluates every k in `1..=k_max` and selects k*.
pub fn optimize<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    metric: Metric,
    policy: TieBreakPolicy,
    memory_budget: u64,
) -> Result<SweepOutcome> {
    let (matrix, build) = build_sorted_matrix_timed(dataset, folds, metric, memory_budget)?;
    let start = Instant::now();
    let accuracy = sweep(&matrix, folds, dataset.labels(), policy)?;
    let mut report = select_k(&accuracy);
    let swept = start.elapsed();
    drop(matrix);

    report.timing.distance = build.distance.as_secs_f64();
    report.timing.sort = build.sort.as_secs_f64();
    report.timing.sweep = swept.as_secs_f64();
    report.timing.total = report.timing.distance + report.timing.sort + report.timing.sweep;
    Ok(SweepOutcome { report, accuracy })
}
