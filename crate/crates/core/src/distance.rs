//! Fold-masked, row-sorted distance matrix.
//!
//! Row `r` holds one [`Entry`] per row of a *different* fold, sorted by
//! `(distance, source)` ascending. Same-fold pairs and the diagonal are not
//! stored at all, so row lengths are `n - fold_size(fold_of[r])`.
//!
//! Construction computes each cross-fold unordered pair exactly once
//! (upper triangle, `i < j`) and mirrors it into both rows, then sorts rows
//! independently. Both phases run in parallel over rows and produce the same
//! matrix regardless of thread count.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::mem::size_of;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassCode, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default memory budget for [`build_sorted_matrix`]: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// L2, square root of the summed squared differences.
    #[default]
    Euclidean,
    /// L1.
    Manhattan,
    /// L-infinity.
    Chebyshev,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Chebyshev];

    /// Distance between equal-length vectors; see [`pairwise_distance`].
    pub fn distance<T: Scalar>(self, a: &[T], b: &[T]) -> Result<T> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(self.eval(a, b))
    }

    /// Unchecked kernel. Accumulates in ascending feature order. Symmetric
    /// bit-for-bit because `a - b` and `b - a` differ only in sign.
    #[inline]
    pub(crate) fn eval<T: Scalar>(self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        let diffs = a.iter().zip(b).map(|(&x, &y)| x - y);
        match self {
            Metric::Euclidean => diffs.fold(T::zero(), |acc, d| acc + d * d).sqrt(),
            Metric::Manhattan => diffs.fold(T::zero(), |acc, d| acc + d.abs()),
            Metric::Chebyshev => diffs.fold(T::zero(), |acc, d| acc.max(d.abs())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Chebyshev => "chebyshev",
        }
    }

    fn code(self) -> u32 {
        match self {
            Metric::Euclidean => 0,
            Metric::Manhattan => 1,
            Metric::Chebyshev => 2,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::BadParams(format!("unknown metric {s:?}")))
    }
}

/// Distance between two feature vectors under `metric`.
pub fn pairwise_distance<T: Scalar>(a: &[T], b: &[T], metric: Metric) -> Result<T> {
    metric.distance(a, b)
}

/// One neighbor in a sorted row.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C)]
pub struct Entry<T> {
    pub distance: T,
    pub label: ClassCode,
    /// Row index of the neighbor in the dataset.
    pub source: u32,
}

/// Total order used for every neighbor list in the crate: distance, then
/// source index.
#[inline]
pub(crate) fn neighbor_order<T: Scalar>(da: T, sa: usize, db: T, sb: usize) -> Ordering {
    da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(sa.cmp(&sb))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SortedDistanceMatrix<T> {
    entries: Vec<Entry<T>>,
    offsets: Vec<usize>,
    fold_count: usize,
    k_max: usize,
    metric: Metric,
}

impl<T: Scalar> SortedDistanceMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, r: usize) -> &[Entry<T>] {
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Entry<T>]> + '_ {
        self.offsets.windows(2).map(|w| &self.entries[w[0]..w[1]])
    }

    pub fn valid_len(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }

    pub fn valid_lens(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Usable neighbor depth: the shortest row length.
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Bytes held by the entry and offset buffers.
    pub fn footprint(&self) -> u64 {
        (self.entries.len() * size_of::<Entry<T>>() + self.offsets.len() * size_of::<usize>()) as u64
    }

    #[cfg(test)]
    pub(crate) fn set_all_labels(&mut self, label: ClassCode) {
        self.entries.iter_mut().for_each(|e| e.label = label);
    }

    fn from_rows(rows: Vec<Vec<Entry<T>>>, fold_count: usize, metric: Metric) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        for row in &rows {
            offsets.push(offsets.last().unwrap() + row.len());
        }
        let k_max = rows.iter().map(Vec::len).min().unwrap_or(0);
        Self {
            entries: rows.concat(),
            offsets,
            fold_count,
            k_max,
            metric,
        }
    }

    /// Writes the little-endian debug dump.
    ///
    /// ```text
    /// magic     4 bytes  "KSDM"
    /// version   u32      1
    /// n         u64
    /// f         u64
    /// k_max     u64
    /// metric    u32      0 euclidean, 1 manhattan, 2 chebyshev
    /// n times:
    ///   len     u64
    ///   len times: distance f64, label u32, source u32
    /// ```
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&DUMP_VERSION.to_le_bytes())?;
        for v in [self.n_rows(), self.fold_count, self.k_max] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        out.write_all(&self.metric.code().to_le_bytes())?;
        for row in self.rows() {
            out.write_all(&(row.len() as u64).to_le_bytes())?;
            for e in row {
                out.write_all(&e.distance.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
                out.write_all(&e.label.to_le_bytes())?;
                out.write_all(&e.source.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a dump produced by [`write_to`](Self::write_to).
    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = read_u64(&mut input)? as usize;
        let fold_count = read_u64(&mut input)? as usize;
        let k_max = read_u64(&mut input)? as usize;
        let metric = Metric::from_code(read_u32(&mut input)?)
            .ok_or_else(|| Error::Format("unknown metric code".into()))?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u64(&mut input)? as usize;
            let mut row = Vec::with_capacity(len);
            for _ in 0..len {
                let mut buf = [0u8; 8];
                input.read_exact(&mut buf)?;
                let d = f64::from_le_bytes(buf);
                row.push(Entry {
                    distance: T::from_f64(d).ok_or_else(|| Error::Format(format!("distance {d}")))?,
                    label: read_u32(&mut input)?,
                    source: read_u32(&mut input)?,
                });
            }
            rows.push(row);
        }
        let m = Self::from_rows(rows, fold_count, metric);
        if m.k_max != k_max {
            return Err(Error::Format(format!("header k_max {k_max} but rows give {}", m.k_max)));
        }
        Ok(m)
    }
}

const DUMP_MAGIC: &[u8; 4] = b"KSDM";
const DUMP_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Bytes for a matrix over `n` rows split into `f` near-equal folds (sizes
/// differing by at most one, as produced by stratified assignment).
///
/// Layout: `n (n - fold size)` entries of `size_of::<Entry<T>>()` bytes plus
/// `n + 1` row offsets. The transient upper triangle used during construction
/// is not counted.
pub fn estimate_footprint<T: Scalar>(n: usize, f: usize) -> u64 {
    let f = f.clamp(1, n.max(1));
    let (q, extra) = (n / f, n % f);
    let sizes = std::iter::repeat_n(q + 1, extra).chain(std::iter::repeat_n(q, f - extra));
    footprint_for::<T>(sizes, n)
}

/// Exact bytes for the given fold sizes.
pub fn footprint_for_fold_sizes<T: Scalar>(fold_sizes: &[usize]) -> u64 {
    let n = fold_sizes.iter().sum();
    footprint_for::<T>(fold_sizes.iter().copied(), n)
}

fn footprint_for<T: Scalar>(sizes: impl Iterator<Item = usize>, n: usize) -> u64 {
    let entries: u64 = sizes.map(|s| (s * (n - s)) as u64).sum();
    entries * size_of::<Entry<T>>() as u64 + ((n + 1) * size_of::<usize>()) as u64
}

/// Phase timings of [`build_sorted_matrix_timed`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BuildTiming {
    /// Upper-triangle distance computation.
    pub distance: Duration,
    /// Mirroring into rows and sorting them.
    pub sort: Duration,
}

pub fn build_sorted_matrix<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    metric: Metric,
    memory_budget: u64,
) -> Result<SortedDistanceMatrix<T>> {
    build_sorted_matrix_timed(dataset, folds, metric, memory_budget).map(|(m, _)| m)
}

pub fn build_sorted_matrix_timed<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldAssignment,
    metric: Metric,
    memory_budget: u64,
) -> Result<(SortedDistanceMatrix<T>, BuildTiming)> {
    let n = dataset.n_rows();
    if folds.n_rows() != n {
        return Err(Error::InconsistentFolds(format!(
            "{} fold indices for {n} rows",
            folds.n_rows()
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::BadParams(format!("{n} rows exceed the u32 source index")));
    }
    let required = footprint_for_fold_sizes::<T>(folds.fold_sizes());
    if required > memory_budget {
        return Err(Error::MemoryBudgetExceeded {
            required,
            available: memory_budget,
        });
    }

    let fold_of = folds.fold_of();
    let labels = dataset.labels();

    let start = Instant::now();
    // upper[i] holds d(i, j) for every j > i in another fold, ascending j.
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = dataset.row(i);
            (i + 1..n)
                .filter(|&j| fold_of[j] != fold_of[i])
                .map(|j| metric.eval(a, dataset.row(j)))
                .collect()
        })
        .collect();
    let distance = start.elapsed();

    let start = Instant::now();
    // before[fold * (n + 1) + x] = rows among 0..x assigned to `fold`.
    let f = folds.fold_count();
    let mut before = vec![0u32; f * (n + 1)];
    for fold in 0..f {
        let counts = &mut before[fold * (n + 1)..(fold + 1) * (n + 1)];
        for x in 0..n {
            counts[x + 1] = counts[x] + u32::from(fold_of[x] == fold);
        }
    }
    // Position of j inside upper[i], for i < j in different folds.
    let upper_pos = |i: usize, j: usize| -> usize {
        let same = &before[fold_of[i] * (n + 1)..];
        (j - i - 1) - (same[j] - same[i + 1]) as usize
    };

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    for &fr in fold_of {
        offsets.push(offsets[offsets.len() - 1] + n - folds.fold_sizes()[fr]);
    }
    let mut entries = vec![Entry::default(); offsets[n]];
    let mut row_slices = Vec::with_capacity(n);
    let mut rest = entries.as_mut_slice();
    for w in offsets.windows(2) {
        let (row, tail) = rest.split_at_mut(w[1] - w[0]);
        row_slices.push(row);
        rest = tail;
    }

    row_slices.into_par_iter().enumerate().for_each(|(r, row)| {
        let fr = fold_of[r];
        let lower = (0..r).filter(|&m| fold_of[m] != fr).map(|m| (m, upper[m][upper_pos(m, r)]));
        let higher = (r + 1..n).filter(|&m| fold_of[m] != fr).zip(upper[r].iter().copied());
        for (slot, (m, distance)) in row.iter_mut().zip(lower.chain(higher)) {
            *slot = Entry {
                distance,
                label: labels[m],
                source: m as u32,
            };
        }
        row.sort_unstable_by(|a, b| {
            neighbor_order(a.distance, a.source as usize, b.distance, b.source as usize)
        });
    });
    drop(upper);
    let k_max = offsets.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(0);
    let matrix = SortedDistanceMatrix {
        entries,
        offsets,
        fold_count: f,
        k_max,
        metric,
    };
    let sort = start.elapsed();

    Ok((matrix, BuildTiming { distance, sort }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::stratify_labels;
    use proptest::prelude::*;

    fn toy() -> (Dataset<f64>, FoldAssignment) {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0]], vec![0, 0, 1, 1]).unwrap();
        (ds, FoldAssignment::from_fold_of(vec![0, 1, 0, 1], 2).unwrap())
    }

    /// Independent route: every ordered pair recomputed with a local formula,
    /// masked, then sorted.
    fn brute_rows(ds: &Dataset<f64>, folds: &FoldAssignment, metric: Metric) -> Vec<Vec<(f64, u32, u32)>> {
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            let d = a.iter().zip(b).map(|(x, y)| (x - y).abs());
            match metric {
                Metric::Euclidean => d.map(|v| v * v).sum::<f64>().sqrt(),
                Metric::Manhattan => d.sum(),
                Metric::Chebyshev => d.fold(0.0, f64::max),
            }
        };
        (0..ds.n_rows())
            .map(|r| {
                let mut row: Vec<_> = (0..ds.n_rows())
                    .filter(|&m| folds.fold_of()[m] != folds.fold_of()[r])
                    .map(|m| (dist(ds.row(r), ds.row(m)), ds.labels()[m], m as u32))
                    .collect();
                row.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
                row
            })
            .collect()
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_distance(&[0.0], &[3.0], Metric::Euclidean).unwrap(), 3.0);
        assert_eq!(pairwise_distance(&[1.0, 1.0], &[4.0, 5.0], Metric::Euclidean).unwrap(), 5.0);
        assert_eq!(pairwise_distance(&[1.0, 1.0], &[4.0, 5.0], Metric::Manhattan).unwrap(), 7.0);
        assert_eq!(pairwise_distance(&[1.0, 1.0], &[4.0, 5.0], Metric::Chebyshev).unwrap(), 4.0);
        for m in Metric::ALL {
            assert_eq!(pairwise_distance(&[2.5f32, -1.0], &[2.5, -1.0], m).unwrap(), 0.0);
        }
        assert!(matches!(
            pairwise_distance(&[1.0], &[1.0, 2.0], Metric::Euclidean),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("cosine".parse::<Metric>().is_err());
    }

    #[test]
    fn toy_matrix() {
        let (ds, folds) = toy();
        let m = build_sorted_matrix(&ds, &folds, Metric::Euclidean, DEFAULT_MEMORY_BUDGET).unwrap();
        let row0: Vec<_> = m.row(0).iter().map(|e| (e.distance, e.label, e.source)).collect();
        assert_eq!(row0, vec![(1.0, 0, 1), (10.0, 1, 3)]);
        assert_eq!(m.valid_lens(), vec![2, 2, 2, 2]);
        assert_eq!(m.k_max(), 2);
        // row 1 has a distance tie between sources 0 and 2
        let row1: Vec<_> = m.row(1).iter().map(|e| e.source).collect();
        assert_eq!(row1, vec![0, 2]);
        let expected = brute_rows(&ds, &folds, Metric::Euclidean);
        for r in 0..4 {
            let got: Vec<_> = m.row(r).iter().map(|e| (e.distance, e.label, e.source)).collect();
            assert_eq!(got, expected[r]);
        }
    }

    #[test]
    fn leave_one_out_masks_only_self() {
        let ds: Dataset<f64> = crate::generate_synthetic(7, 2, 2, 0.3, 1).unwrap();
        let folds = FoldAssignment::from_fold_of((0..7).collect(), 7).unwrap();
        let m = build_sorted_matrix(&ds, &folds, Metric::Euclidean, DEFAULT_MEMORY_BUDGET).unwrap();
        assert_eq!(m.valid_lens(), vec![6; 7]);
        assert_eq!(m.k_max(), 6);
        for r in 0..7 {
            assert!(m.row(r).iter().all(|e| e.source as usize != r));
        }
    }

    #[test]
    fn duplicates_in_other_fold_come_first() {
        let ds = Dataset::from_rows(&[vec![3.0, 1.0], vec![0.0, 0.0], vec![3.0, 1.0], vec![9.0, 9.0]], vec![0, 1, 1, 0])
            .unwrap();
        let folds = FoldAssignment::from_fold_of(vec![0, 0, 1, 1], 2).unwrap();
        let m = build_sorted_matrix(&ds, &folds, Metric::Euclidean, DEFAULT_MEMORY_BUDGET).unwrap();
        assert_eq!((m.row(0)[0].source, m.row(0)[0].distance), (2, 0.0));
        assert_eq!((m.row(2)[0].source, m.row(2)[0].distance), (0, 0.0));
    }

    #[test]
    fn memory_guard_and_consistency() {
        let (ds, folds) = toy();
        let need = footprint_for_fold_sizes::<f64>(folds.fold_sizes());
        match build_sorted_matrix(&ds, &folds, Metric::Euclidean, need - 1) {
            Err(Error::MemoryBudgetExceeded { required, available }) => {
                assert_eq!((required, available), (need, need - 1));
            }
            other => panic!("{other:?}"),
        }
        let m = build_sorted_matrix(&ds, &folds, Metric::Euclidean, need).unwrap();
        assert_eq!(m.footprint(), need);

        let short = FoldAssignment::from_fold_of(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(
            build_sorted_matrix(&ds, &short, Metric::Euclidean, DEFAULT_MEMORY_BUDGET),
            Err(Error::InconsistentFolds(_))
        ));
    }

    #[test]
    fn footprint_scaling() {
        let e = size_of::<Entry<f64>>() as u64;
        let overhead = 5 * size_of::<usize>() as u64;
        assert_eq!(estimate_footprint::<f64>(4, 2), 4 * 2 * e + overhead);
        let small = estimate_footprint::<f64>(1000, 5) as f64;
        let big = estimate_footprint::<f64>(2000, 5) as f64;
        assert!((big / small - 4.0).abs() < 0.01);
        let mut last = 0;
        for n in 2..300 {
            let v = estimate_footprint::<f64>(n, 5);
            assert!(v > last, "not increasing at n={n}");
            last = v;
        }
        assert!(estimate_footprint::<f32>(100, 5) < estimate_footprint::<f64>(100, 5));
    }

    #[test]
    fn dump_round_trip() {
        let ds: Dataset<f64> = crate::generate_synthetic(30, 3, 3, 0.5, 4).unwrap();
        let folds = stratify_labels(ds.labels(), 4, 2).unwrap();
        let m = build_sorted_matrix(&ds, &folds, Metric::Manhattan, DEFAULT_MEMORY_BUDGET).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"KSDM");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 30);
        assert_eq!(buf.len(), 4 + 4 + 24 + 4 + 30 * 8 + m.valid_lens().iter().sum::<usize>() * 16);
        let back = SortedDistanceMatrix::<f64>::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        buf[0] = b'X';
        assert!(matches!(SortedDistanceMatrix::<f64>::read_from(buf.as_slice()), Err(Error::Format(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_brute_force(
            n in 4usize..50,
            d in 1usize..4,
            f in 2usize..5,
            seed in any::<u64>(),
            grid in any::<bool>(),
            metric in prop::sample::select(Metric::ALL.to_vec()),
        ) {
            prop_assume!(f <= n);
            let ds: Dataset<f64> = crate::generate_synthetic(n, d, 2, 0.7, seed).unwrap();
            // grid data forces many exact distance ties
            let ds = if grid {
                Dataset::new(ds.features().iter().map(|v| (v * 2.0).round()).collect(), d, ds.labels().to_vec(), ds.class_names().to_vec()).unwrap()
            } else { ds };
            let folds = stratify_labels(ds.labels(), f, seed ^ 1).unwrap();
            let m = build_sorted_matrix(&ds, &folds, metric, DEFAULT_MEMORY_BUDGET).unwrap();
            let expected = brute_rows(&ds, &folds, metric);
            for r in 0..n {
                prop_assert_eq!(m.valid_len(r), n - folds.fold_sizes()[folds.fold_of()[r]]);
                let got: Vec<_> = m.row(r).iter().map(|e| (e.distance, e.label, e.source)).collect();
                prop_assert_eq!(&got, &expected[r]);
                for e in m.row(r) {
                    let back = m.row(e.source as usize).iter().find(|x| x.source as usize == r).unwrap();
                    prop_assert_eq!(back.distance.to_bits(), e.distance.to_bits());
                }
            }
            prop_assert_eq!(m.k_max(), n - folds.max_fold_size());
        }
    }
}
