//! Brute-force kNN and conventional per-k cross-validation.
//!
//! This is both the correctness reference for the sweep and the slow
//! baseline it is timed against: every `cross_validate` call recomputes all
//! query-to-training distances from scratch. Tie rules are the crate-wide
//! ones (distance ties by row index, vote ties by [`classify_at_k`]), so the
//! per-fold counts match the sweep exactly.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassCode, Dataset, FoldAssignment};
use crate::distance::{neighbor_order, Metric};
use crate::error::{Error, Result};
use crate::report::{select_scheduled, KSearchReport};
use crate::scalar::Scalar;
use crate::sweep::{classify_at_k, TieBreakPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Full,
    Logarithmic,
}

/// Strictly ascending set of k values to evaluate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSchedule {
    values: Vec<usize>,
    mode: ScheduleMode,
}

impl KSchedule {
    /// Every k in `1..=k_max`.
    pub fn full(k_max: usize) -> Self {
        Self {
            values: (1..=k_max.max(1)).collect(),
            mode: ScheduleMode::Full,
        }
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn max(&self) -> usize {
        *self.values.last().unwrap()
    }
}

/// `{1..8} ∪ {10} ∪ {100, 200, 300, ...} ∪ {k_max}`, restricted to
/// `1..=k_max`.
///
/// Nothing is inserted between 10 and 100; above 100 the step stays 100.
pub fn logarithmic_schedule(k_max: usize) -> KSchedule {
    let k_max = k_max.max(1);
    let mut values: Vec<usize> = (1..=8).chain([10]).chain((100..=k_max).step_by(100)).collect();
    values.retain(|&k| k <= k_max);
    values.push(k_max);
    values.dedup();
    KSchedule {
        values,
        mode: ScheduleMode::Logarithmic,
    }
}

/// Classifies `query` against a flat row-major training set.
pub fn knn_classify<T: Scalar>(
    train_features: &[T],
    train_labels: &[ClassCode],
    query: &[T],
    k: usize,
    metric: Metric,
    policy: TieBreakPolicy,
) -> Result<ClassCode> {
    let d = query.len();
    if d == 0 || train_features.len() != train_labels.len() * d {
        return Err(Error::DimensionMismatch {
            left: train_features.len(),
            right: train_labels.len() * d,
        });
    }
    let n_classes = train_labels.iter().max().map_or(0, |&m| m as usize + 1);
    classify_brute(train_features, train_labels, n_classes, query, k, metric, policy)
}

fn classify_brute<T: Scalar>(
    train_features: &[T],
    train_labels: &[ClassCode],
    n_classes: usize,
    query: &[T],
    k: usize,
    metric: Metric,
    policy: TieBreakPolicy,
) -> Result<ClassCode> {
    let m = train_labels.len();
    if k == 0 || k > m {
        return Err(Error::KTooLarge { k, max: m });
    }
    let d = query.len();
    let mut nearest: Vec<(T, usize)> = train_features
        .chunks_exact(d)
        .enumerate()
        .map(|(i, row)| (metric.eval(query, row), i))
        .collect();
    let order = |a: &(T, usize), b: &(T, usize)| neighbor_order(a.0, a.1, b.0, b.1);
    if k < m {
        nearest.select_nth_unstable_by(k - 1, order);
        nearest.truncate(k);
    }
    if policy == TieBreakPolicy::ShadowMin {
        // summed distances must accumulate nearest-first to match the sweep
        nearest.sort_unstable_by(order);
    }
    let mut counts = vec![0u32; n_classes];
    let mut shadow = vec![T::zero(); n_classes];
    for &(dist, i) in &nearest {
        let c = train_labels[i] as usize;
        counts[c] += 1;
        shadow[c] = shadow[c] + dist;
    }
    classify_at_k(&counts, &shadow, policy)
}

/// Training rows (ascending index) and test rows of one fold.
struct FoldSplit<T> {
    train_features: Vec<T>,
    train_labels: Vec<ClassCode>,
    test_rows: Vec<usize>,
}

fn split<T: Scalar>(dataset: &Dataset<T>, folds: &FoldAssignment, fold: usize) -> FoldSplit<T> {
    let mut s = FoldSplit {
        train_features: Vec::new(),
        train_labels: Vec::new(),
        test_rows: Vec::new(),
    };
    for (r, &i) in folds.fold_of().iter().enumerate() {
        if i == fold {
            s.test_rows.push(r);
        } else {
            s.train_features.extend_from_slice(dataset.row(r));
            s.train_labels.push(dataset.labels()[r]);
        }
    }
    s
}

fn check_folds<T: Scalar>(dataset: &Dataset<T>, folds: &FoldAssignment) -> Result<()> {
    if folds.n_rows() != dataset.n_rows() {
        return Err(Error::InconsistentFolds(format!(
            "{} fold indices for {} rows",
            folds.n_rows(),
            dataset.n_rows()
        )));
    }
    Ok(())
}

/// Per-fold correct counts at a single k, retraining from scratch per fold.
pub fn cross_validate<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    k: usize,
    metric: Metric,
    policy: TieBreakPolicy,
) -> Result<Vec<u32>> {
    check_folds(dataset, folds)?;
    if k == 0 || k > folds.k_max() {
        return Err(Error::KTooLarge { k, max: folds.k_max() });
    }
    let s = dataset.n_classes();
    (0..folds.fold_count())
        .map(|fold| {
            let FoldSplit {
                train_features,
                train_labels,
                test_rows,
            } = split(dataset, folds, fold);
            let hits = test_rows
                .par_iter()
                .map(|&r| {
                    let p = classify_brute(&train_features, &train_labels, s, dataset.row(r), k, metric, policy)?;
                    Ok(u32::from(p == dataset.labels()[r]))
                })
                .collect::<Result<Vec<u32>>>()?;
            Ok(hits.iter().sum())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NaiveOptions {
    /// Sort each test row's neighbors once per fold and reuse them across k.
    /// Same output, much faster; meant for tests, not for timing.
    pub cache_per_fold: bool,
}

/// Result of [`naive_search_with`]: the report plus the per-fold correct
/// counts behind it, one row per scheduled k.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveOutcome {
    pub report: KSearchReport,
    pub correct: Vec<Vec<u32>>,
}

/// Conventional search: one full cross-validation per scheduled k.
pub fn naive_search<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    schedule: &KSchedule,
    metric: Metric,
    policy: TieBreakPolicy,
) -> Result<KSearchReport> {
    naive_search_with(dataset, folds, schedule, metric, policy, NaiveOptions::default()).map(|o| o.report)
}

pub fn naive_search_with<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    schedule: &KSchedule,
    metric: Metric,
    policy: TieBreakPolicy,
    options: NaiveOptions,
) -> Result<NaiveOutcome> {
    check_folds(dataset, folds)?;
    if schedule.max() > folds.k_max() {
        return Err(Error::KTooLarge {
            k: schedule.max(),
            max: folds.k_max(),
        });
    }
    let start = Instant::now();
    let correct = if options.cache_per_fold {
        cached_counts(dataset, folds, schedule.values(), metric, policy)?
    } else {
        schedule
            .values()
            .iter()
            .map(|&k| cross_validate(dataset, folds, k, metric, policy))
            .collect::<Result<Vec<_>>>()?
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = select_scheduled(schedule.values(), &correct, folds.fold_sizes())?;
    report.timing.total = elapsed;
    Ok(NaiveOutcome { report, correct })
}

fn cached_counts<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    ks: &[usize],
    metric: Metric,
    policy: TieBreakPolicy,
) -> Result<Vec<Vec<u32>>> {
    let s = dataset.n_classes();
    let mut correct = vec![vec![0u32; folds.fold_count()]; ks.len()];
    for fold in 0..folds.fold_count() {
        let FoldSplit {
            train_features,
            train_labels,
            test_rows,
        } = split(dataset, folds, fold);
        let d = dataset.n_features();
        for &r in &test_rows {
            let query = dataset.row(r);
            let mut nearest: Vec<(T, usize)> = train_features
                .chunks_exact(d)
                .enumerate()
                .map(|(i, row)| (metric.eval(query, row), i))
                .collect();
            nearest.sort_unstable_by(|a, b| neighbor_order(a.0, a.1, b.0, b.1));
            for (slot, &k) in ks.iter().enumerate() {
                let mut counts = vec![0u32; s];
                let mut shadow = vec![T::zero(); s];
                for &(dist, i) in &nearest[..k] {
                    let c = train_labels[i] as usize;
                    counts[c] += 1;
                    shadow[c] = shadow[c] + dist;
                }
                if classify_at_k(&counts, &shadow, policy)? == dataset.labels()[r] {
                    correct[slot][fold] += 1;
                }
            }
        }
    }
    Ok(correct)
}
