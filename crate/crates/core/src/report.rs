//! Choosing k* from per-fold accuracies and exporting accuracy curves.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::AccuracyMatrix;

/// Mean and population standard deviation of the per-fold accuracies at `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Wall-clock seconds per phase. Naive searches interleave distances and
/// voting, so they only fill `total`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub distance: f64,
    pub sort: f64,
    pub sweep: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSearchReport {
    pub best_k_per_fold: Vec<usize>,
    pub k_star: usize,
    pub curve: Vec<CurvePoint>,
    pub evaluated_k: Vec<usize>,
    pub timing: PhaseTiming,
}

impl KSearchReport {
    /// Copy with all wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: PhaseTiming::default(),
            ..self.clone()
        }
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("k,mean_accuracy,std_accuracy\n");
        for p in &self.curve {
            writeln!(out, "{},{:.6},{:.6}", p.k, p.mean_accuracy, p.std_accuracy).unwrap();
        }
        out
    }
}

/// k* over the full range `1..=acc.k_max()`.
pub fn select_k(acc: &AccuracyMatrix) -> KSearchReport {
    let ks: Vec<usize> = (1..=acc.k_max()).collect();
    let rows: Vec<&[u32]> = ks.iter().map(|&k| acc.row(k)).collect();
    select_over(ks, &rows, acc.fold_sizes())
}

/// k* over an arbitrary ascending set of evaluated k, given the per-fold
/// correct counts at each of them.
pub fn select_scheduled(evaluated_k: &[usize], correct: &[Vec<u32>], fold_sizes: &[usize]) -> Result<KSearchReport> {
    if evaluated_k.is_empty() || evaluated_k.len() != correct.len() {
        return Err(Error::InconsistentInputs(format!(
            "{} evaluated k for {} rows of counts",
            evaluated_k.len(),
            correct.len()
        )));
    }
    if evaluated_k[0] == 0 || evaluated_k.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InconsistentInputs("evaluated k must be strictly ascending from 1".into()));
    }
    if correct.iter().any(|row| row.len() != fold_sizes.len()) {
        return Err(Error::InconsistentInputs("count rows do not match the fold count".into()));
    }
    let rows: Vec<&[u32]> = correct.iter().map(Vec::as_slice).collect();
    Ok(select_over(evaluated_k.to_vec(), &rows, fold_sizes))
}

fn select_over(evaluated_k: Vec<usize>, rows: &[&[u32]], fold_sizes: &[usize]) -> KSearchReport {
    let f = fold_sizes.len();

    // strict `>` keeps the smallest k among equal maxima
    let best_k_per_fold: Vec<usize> = (0..f)
        .map(|i| {
            let mut best = 0;
            for (j, row) in rows.iter().enumerate() {
                if row[i] > rows[best][i] {
                    best = j;
                }
            }
            evaluated_k[best]
        })
        .collect();

    // round half up: floor(sum / f + 1/2) = floor((2 sum + f) / 2f)
    let sum: usize = best_k_per_fold.iter().sum();
    let k_hi = *evaluated_k.last().unwrap();
    let k_star = ((2 * sum + f) / (2 * f)).clamp(1, k_hi);

    let curve = evaluated_k
        .iter()
        .zip(rows)
        .map(|(&k, row)| {
            let acc: Vec<f64> = row
                .iter()
                .zip(fold_sizes)
                .map(|(&c, &size)| f64::from(c) / size as f64)
                .collect();
            let mean = acc.iter().sum::<f64>() / f as f64;
            let var = acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / f as f64;
            CurvePoint {
                k,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
            }
        })
        .collect();

    KSearchReport {
        best_k_per_fold,
        k_star,
        curve,
        evaluated_k,
        timing: PhaseTiming::default(),
    }
}

/// Writes `k,mean_accuracy,std_accuracy` with six decimals, one row per
/// evaluated k.
pub fn accuracy_curve_export(report: &KSearchReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, report.curve_csv())?;
    Ok(())
}
