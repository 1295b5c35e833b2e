//! Labeled datasets, CSV ingestion, stratified folds and a synthetic
//! Gaussian-mixture generator.
//!
//! Label codes are assigned by first appearance, so the smallest-code vote
//! tie-break favors whichever class shows up first in the input.
//!
//! # Fold shuffling
//!
//! Fold assignment is reproducible across platforms and releases. The shuffle
//! uses xoshiro256++ seeded through SplitMix64 (`Xoshiro256PlusPlus::seed_from_u64`)
//! and a Fisher-Yates pass written out here, drawing each index as
//! `(next_u64() * bound) >> 64` in 128-bit arithmetic. Classes are shuffled in
//! ascending code order from a single generator stream.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Class code, `0..n_classes`.
pub type ClassCode = u32;

/// Dense row-major feature matrix with integer-encoded labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    n_features: usize,
    labels: Vec<ClassCode>,
    class_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from a flat row-major feature buffer.
    ///
    /// Checks every invariant: at least two rows and two classes, every class
    /// code in use, all features finite.
    pub fn new(
        features: Vec<T>,
        n_features: usize,
        labels: Vec<ClassCode>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::NoFeatures);
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                left: features.len(),
                right: labels.len() * n_features,
            });
        }
        let n = labels.len();
        if n < 2 {
            return Err(Error::EmptyDataset(n));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: pos / n_features,
                column: pos % n_features,
            });
        }
        let s = class_names.len();
        let mut seen = vec![false; s];
        for &l in &labels {
            let slot = seen.get_mut(l as usize).ok_or_else(|| {
                Error::BadParams(format!("label code {l} has no class name (s = {s})"))
            })?;
            *slot = true;
        }
        if let Some(c) = seen.iter().position(|&x| !x) {
            return Err(Error::BadParams(format!("class code {c} never occurs")));
        }
        if s < 2 {
            return Err(Error::SingleClass(s));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            class_names,
        })
    }

    /// Convenience constructor from nested rows; class names default to the
    /// decimal codes.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<ClassCode>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                left: bad.len(),
                right: d,
            });
        }
        let s = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let names = (0..s).map(|c| c.to_string()).collect();
        Self::new(rows.concat(), d, labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> &[ClassCode] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Original label string of row `r`.
    pub fn class_name_of(&self, r: usize) -> &str {
        &self.class_names[self.labels[r] as usize]
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.features[r * self.n_features..(r + 1) * self.n_features]
    }

    /// Copy with every feature multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(
            self.features.iter().map(|&v| v * factor).collect(),
            self.n_features,
            self.labels.clone(),
            self.class_names.clone(),
        )
    }
}

/// Which CSV column holds the class label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < headers.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::Parse {
                line: 1,
                column: i.to_string(),
                message: format!("label column index out of range ({} columns)", headers.len()),
            }),
            LabelColumn::Name(name) => {
                headers
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| Error::Parse {
                        line: 1,
                        column: name.clone(),
                        message: "label column not found in header".into(),
                    })
            }
        }
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings select by index, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        s.parse().unwrap()
    }
}

impl From<usize> for LabelColumn {
    fn from(i: usize) -> Self {
        LabelColumn::Index(i)
    }
}

/// Loads a headed, comma-separated file.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset<T>> {
    load_csv_from_reader(File::open(path)?, label_column)
}

/// Same as [`load_csv`] over any reader.
pub fn load_csv_from_reader<T: Scalar, R: Read>(
    reader: R,
    label_column: &LabelColumn,
) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let label_idx = label_column.resolve(&headers)?;
    let n_features = headers.len() - 1;
    if n_features == 0 {
        return Err(Error::NoFeatures);
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut codes: HashMap<String, ClassCode> = HashMap::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                if field.is_empty() {
                    return Err(Error::Parse {
                        line,
                        column: headers[col].to_string(),
                        message: "empty label".into(),
                    });
                }
                let next = class_names.len() as ClassCode;
                let code = *codes.entry(field.to_string()).or_insert_with(|| {
                    class_names.push(field.to_string());
                    next
                });
                labels.push(code);
            } else {
                let v: T = field.parse().map_err(|_| Error::Parse {
                    line,
                    column: headers[col].to_string(),
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature {
                        row,
                        column: if col < label_idx { col } else { col - 1 },
                    });
                }
                features.push(v);
            }
        }
    }

    if labels.len() < 2 {
        return Err(Error::EmptyDataset(labels.len()));
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass(class_names.len()));
    }
    Dataset::new(features, n_features, labels, class_names)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Partition index of every row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    fold_sizes: Vec<usize>,
}

impl FoldAssignment {
    /// Explicit assignment; every fold in `0..fold_count` must be non-empty.
    pub fn from_fold_of(fold_of: Vec<usize>, fold_count: usize) -> Result<Self> {
        if fold_count < 2 {
            return Err(Error::BadFoldCount(fold_count));
        }
        if fold_count > fold_of.len() {
            return Err(Error::TooManyFolds {
                folds: fold_count,
                rows: fold_of.len(),
            });
        }
        let mut fold_sizes = vec![0; fold_count];
        for (r, &i) in fold_of.iter().enumerate() {
            *fold_sizes.get_mut(i).ok_or_else(|| {
                Error::InconsistentFolds(format!("row {r} assigned to fold {i} of {fold_count}"))
            })? += 1;
        }
        if let Some(i) = fold_sizes.iter().position(|&c| c == 0) {
            return Err(Error::InconsistentFolds(format!("fold {i} is empty")));
        }
        Ok(Self { fold_of, fold_sizes })
    }

    /// Stratified assignment for `dataset`; see [`stratify_labels`].
    pub fn stratified<T: Scalar>(dataset: &Dataset<T>, fold_count: usize, seed: u64) -> Result<Self> {
        stratify_labels(dataset.labels(), fold_count, seed)
    }

    pub fn n_rows(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_count(&self) -> usize {
        self.fold_sizes.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn fold_sizes(&self) -> &[usize] {
        &self.fold_sizes
    }

    pub fn max_fold_size(&self) -> usize {
        self.fold_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Largest k every row can be evaluated at: `n - max fold size`.
    pub fn k_max(&self) -> usize {
        self.n_rows() - self.max_fold_size()
    }
}

/// Per-class round-robin after a seeded shuffle within each class.
///
/// The round-robin cursor carries over from one class to the next, so fold
/// sizes differ by at most one overall and every fold is non-empty whenever
/// `fold_count <= n`. Classes with fewer members than folds are simply absent
/// from some folds.
pub fn stratify_labels(labels: &[ClassCode], fold_count: usize, seed: u64) -> Result<FoldAssignment> {
    if fold_count < 2 {
        return Err(Error::BadFoldCount(fold_count));
    }
    if fold_count > labels.len() {
        return Err(Error::TooManyFolds {
            folds: fold_count,
            rows: labels.len(),
        });
    }
    let s = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); s];
    for (r, &l) in labels.iter().enumerate() {
        members[l as usize].push(r);
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut cursor = 0;
    for rows in &mut members {
        shuffle(rows, &mut rng);
        for &r in rows.iter() {
            fold_of[r] = cursor;
            cursor = (cursor + 1) % fold_count;
        }
    }
    FoldAssignment::from_fold_of(fold_of, fold_count)
}

fn shuffle<R: RngCore>(items: &mut [usize], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        items.swap(i, j);
    }
}

/// Isotropic Gaussian mixture with one component per class.
///
/// Class `c` is centered on the unit lattice point whose coordinates are the
/// base-`m` digits of `c`, with `m` the smallest base giving `m^d >= s`. Row
/// `r` belongs to class `r % s`, so class sizes differ by at most one and
/// codes coincide with first-appearance order.
pub fn generate_synthetic<T: Scalar>(
    n: usize,
    d: usize,
    s: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if s < 2 || n < s || d == 0 || !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::BadParams(format!(
            "need n >= s >= 2, d >= 1, spread > 0 (got n={n}, d={d}, s={s}, spread={spread})"
        )));
    }
    let mut base = 2usize;
    while (base as f64).powi(d.min(64) as i32) < s as f64 {
        base += 1;
    }
    let center = |c: usize, axis: usize| -> f64 {
        let mut v = c;
        for _ in 0..axis {
            v /= base;
        }
        (v % base) as f64
    };

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let c = r % s;
        for axis in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = center(c, axis) + spread * z;
            features.push(T::from_f64(v).ok_or_else(|| Error::BadParams(format!("{v} not representable")))?);
        }
        labels.push(c as ClassCode);
    }
    let names = (0..s).map(|c| format!("class{c}")).collect();
    Dataset::new(features, d, labels, names)
}
