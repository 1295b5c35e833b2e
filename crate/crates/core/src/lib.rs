//! Cross-validated choice of k for k-nearest-neighbor classification.
//!
//! Instead of re-running a kNN cross-validation for each candidate k, the
//! crate precomputes one distance matrix in which every row only lists
//! neighbors from *other* folds, sorts each row once, and then walks all rows
//! in a single ascending pass over k. Vote counters are incremented one
//! neighbor at a time, so every k from 1 to `k_max` is scored for the cost of
//! one scan.
//!
//! ```text
//! optimize()
//!   ├─ build_sorted_matrix()   distance.rs   O(n^2) distances, O(n^2 log n) sort
//!   ├─ sweep()                 sweep.rs      O(n^2 s) votes
//!   └─ select_k()              report.rs     per-fold argmax, averaged k*
//! ```
//!
//! [`oracle`] holds the conventional brute-force route used as a reference
//! and as the timing baseline.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.
//!
//! ```
//! use kscan::{generate_synthetic, optimize, Dataset64, FoldAssignment, Metric, TieBreakPolicy};
//!
//! let data: Dataset64 = generate_synthetic(60, 2, 3, 0.2, 7).unwrap();
//! let folds = FoldAssignment::stratified(&data, 5, 7).unwrap();
//! let out = optimize(&data, &folds, Metric::Euclidean, TieBreakPolicy::SmallestCode, 1 << 30).unwrap();
//! assert!(out.report.k_star >= 1 && out.report.k_star <= folds.k_max());
//! ```

pub mod dataset;
pub mod distance;
pub mod error;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod sweep;

pub use dataset::{
    generate_synthetic, load_csv, load_csv_from_reader, stratify_labels, ClassCode, Dataset, FoldAssignment,
    LabelColumn,
};
pub use distance::{
    build_sorted_matrix, build_sorted_matrix_timed, estimate_footprint, footprint_for_fold_sizes, pairwise_distance,
    BuildTiming, Entry, Metric, SortedDistanceMatrix, DEFAULT_MEMORY_BUDGET,
};
pub use error::{Error, Result};
pub use oracle::{
    cross_validate, knn_classify, logarithmic_schedule, naive_search, naive_search_with, KSchedule, NaiveOptions,
    NaiveOutcome, ScheduleMode,
};
pub use pipeline::{optimize, SweepOutcome};
pub use report::{accuracy_curve_export, select_k, select_scheduled, CurvePoint, KSearchReport, PhaseTiming};
pub use scalar::Scalar;
pub use sweep::{classify_at_k, sweep, sweep_to_depth, AccuracyMatrix, CountState, TieBreakPolicy};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type SortedDistanceMatrix64 = SortedDistanceMatrix<f64>;
pub type SortedDistanceMatrix32 = SortedDistanceMatrix<f32>;
pub type CountState64 = CountState<f64>;
pub type CountState32 = CountState<f32>;
