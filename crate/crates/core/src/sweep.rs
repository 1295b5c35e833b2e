//! Single ascending pass over k.
//!
//! For every row the per-class vote counts and summed distances grow by one
//! neighbor at a time. After each step the row is classified and the 0/1
//! outcome is added to `correct[k][fold_of[r]]`. Counters are never reset,
//! so the whole range `1..=k_max` costs one walk over each sorted row.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassCode, FoldAssignment};
use crate::distance::SortedDistanceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How to resolve a vote tie among classes with the same maximal count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakPolicy {
    /// Smallest class code wins.
    #[default]
    SmallestCode,
    /// Smallest summed neighbor distance wins; remaining ties go to the
    /// smallest code.
    ShadowMin,
}

impl TieBreakPolicy {
    pub const ALL: [TieBreakPolicy; 2] = [TieBreakPolicy::SmallestCode, TieBreakPolicy::ShadowMin];

    pub fn name(self) -> &'static str {
        match self {
            TieBreakPolicy::SmallestCode => "smallest_code",
            TieBreakPolicy::ShadowMin => "shadow_min",
        }
    }
}

impl fmt::Display for TieBreakPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TieBreakPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| Error::BadParams(format!("unknown tie policy {s:?}")))
    }
}

/// Majority vote over one row's counters.
pub fn classify_at_k<T: Scalar>(counts: &[u32], shadow: &[T], policy: TieBreakPolicy) -> Result<ClassCode> {
    let mut best: Option<usize> = None;
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        best = match best {
            None => Some(c),
            Some(b) if n > counts[b] => Some(c),
            Some(b) if n == counts[b] && policy == TieBreakPolicy::ShadowMin && shadow[c] < shadow[b] => Some(c),
            keep => keep,
        };
    }
    best.map(|c| c as ClassCode).ok_or(Error::EmptyNeighborhood)
}

/// Vote counters and summed distances per row and class after a given depth.
///
/// The sweep keeps only one row of this at a time per worker; the full table
/// is materialized by [`CountState::at_depth`] for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct CountState<T> {
    n_classes: usize,
    counts: Vec<u32>,
    shadow: Vec<T>,
}

impl<T: Scalar> CountState<T> {
    pub fn new(n_rows: usize, n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![0; n_rows * n_classes],
            shadow: vec![T::zero(); n_rows * n_classes],
        }
    }

    /// State after consuming the first `depth` entries of every row (or the
    /// whole row when it is shorter).
    pub fn at_depth(matrix: &SortedDistanceMatrix<T>, n_classes: usize, depth: usize) -> Self {
        let mut state = Self::new(matrix.n_rows(), n_classes);
        for (r, row) in matrix.rows().enumerate() {
            for e in row.iter().take(depth) {
                state.push(r, e.label, e.distance);
            }
        }
        state
    }

    #[inline]
    fn push(&mut self, r: usize, label: ClassCode, distance: T) {
        let i = r * self.n_classes + label as usize;
        self.counts[i] += 1;
        self.shadow[i] = self.shadow[i] + distance;
    }

    pub fn n_rows(&self) -> usize {
        self.counts.len() / self.n_classes
    }

    pub fn counts_row(&self, r: usize) -> &[u32] {
        &self.counts[r * self.n_classes..(r + 1) * self.n_classes]
    }

    pub fn shadow_row(&self, r: usize) -> &[T] {
        &self.shadow[r * self.n_classes..(r + 1) * self.n_classes]
    }
}

/// Correct-classification counts indexed by (k, fold), k starting at 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    correct: Vec<u32>,
    fold_sizes: Vec<usize>,
    k_max: usize,
}

impl AccuracyMatrix {
    /// Builds from one row per k (`rows[k - 1][fold]`).
    pub fn from_rows(rows: &[Vec<u32>], fold_sizes: Vec<usize>) -> Result<Self> {
        let f = fold_sizes.len();
        if rows.is_empty() || f == 0 {
            return Err(Error::InconsistentInputs("empty accuracy matrix".into()));
        }
        for row in rows {
            if row.len() != f {
                return Err(Error::InconsistentInputs(format!("row of {} folds, expected {f}", row.len())));
            }
            if row.iter().zip(&fold_sizes).any(|(&c, &size)| c as usize > size) {
                return Err(Error::InconsistentInputs("correct count exceeds fold size".into()));
            }
        }
        Ok(Self {
            correct: rows.concat(),
            fold_sizes,
            k_max: rows.len(),
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn fold_count(&self) -> usize {
        self.fold_sizes.len()
    }

    pub fn fold_sizes(&self) -> &[usize] {
        &self.fold_sizes
    }

    /// Per-fold correct counts at `k` (1-based).
    pub fn row(&self, k: usize) -> &[u32] {
        assert!((1..=self.k_max).contains(&k), "k = {k} outside 1..={}", self.k_max);
        let f = self.fold_count();
        &self.correct[(k - 1) * f..k * f]
    }

    pub fn correct(&self, k: usize, fold: usize) -> u32 {
        self.row(k)[fold]
    }

    pub fn accuracy(&self, k: usize, fold: usize) -> f64 {
        f64::from(self.correct(k, fold)) / self.fold_sizes[fold] as f64
    }

    /// All rows, k ascending.
    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.correct.chunks(self.fold_count()).map(<[u32]>::to_vec).collect()
    }

    /// First `depth` rows.
    pub fn truncated(&self, depth: usize) -> Self {
        let depth = depth.clamp(1, self.k_max);
        Self {
            correct: self.correct[..depth * self.fold_count()].to_vec(),
            fold_sizes: self.fold_sizes.clone(),
            k_max: depth,
        }
    }
}

/// Accuracy for every k in `1..=matrix.k_max()`.
pub fn sweep<T: Scalar>(
    matrix: &SortedDistanceMatrix<T>,
    folds: &FoldAssignment,
    truth: &[ClassCode],
    policy: TieBreakPolicy,
) -> Result<AccuracyMatrix> {
    sweep_to_depth(matrix, folds, truth, policy, matrix.k_max())
}

/// Accuracy for every k in `1..=depth`.
///
/// A row shorter than `k` keeps its last prediction; with `depth <= k_max`
/// that never happens.
pub fn sweep_to_depth<T: Scalar>(
    matrix: &SortedDistanceMatrix<T>,
    folds: &FoldAssignment,
    truth: &[ClassCode],
    policy: TieBreakPolicy,
    depth: usize,
) -> Result<AccuracyMatrix> {
    let n = matrix.n_rows();
    if folds.n_rows() != n || truth.len() != n {
        return Err(Error::InconsistentInputs(format!(
            "matrix has {n} rows, folds {}, labels {}",
            folds.n_rows(),
            truth.len()
        )));
    }
    if matrix.fold_count() != folds.fold_count() {
        return Err(Error::InconsistentInputs("fold count differs from the matrix".into()));
    }
    for r in 0..n {
        if matrix.valid_len(r) != n - folds.fold_sizes()[folds.fold_of()[r]] {
            return Err(Error::InconsistentInputs(format!("row {r} was built for another fold assignment")));
        }
    }
    if depth == 0 || depth > matrix.k_max() {
        return Err(Error::KTooLarge {
            k: depth,
            max: matrix.k_max(),
        });
    }
    let n_classes = truth.iter().max().map_or(0, |&m| m as usize + 1);
    if matrix.rows().flatten().any(|e| e.label as usize >= n_classes) {
        return Err(Error::InconsistentInputs("neighbor label outside the class range".into()));
    }

    let f = folds.fold_count();
    let fold_of = folds.fold_of();
    const ROWS_PER_TASK: usize = 64;
    let correct = (0..n)
        .into_par_iter()
        .with_min_len(ROWS_PER_TASK)
        .fold(
            || (vec![0u32; depth * f], vec![0u32; n_classes], vec![T::zero(); n_classes]),
            |(mut acc, mut counts, mut shadow), r| {
                counts.fill(0);
                shadow.fill(T::zero());
                let row = matrix.row(r);
                let (fold, want) = (fold_of[r], truth[r]);
                let mut prediction = None;
                for k in 1..=depth {
                    if let Some(e) = row.get(k - 1) {
                        let c = e.label as usize;
                        counts[c] += 1;
                        shadow[c] = shadow[c] + e.distance;
                        prediction = classify_at_k(&counts, &shadow, policy).ok();
                    }
                    if prediction == Some(want) {
                        acc[(k - 1) * f + fold] += 1;
                    }
                }
                (acc, counts, shadow)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(
            || vec![0u32; depth * f],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    Ok(AccuracyMatrix {
        correct,
        fold_sizes: folds.fold_sizes().to_vec(),
        k_max: depth,
    })
}
