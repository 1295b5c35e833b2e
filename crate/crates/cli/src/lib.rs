//! Command-line front end for [`kscan`].
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0  | success |
//! | 1  | internal error (serialization) |
//! | 2  | usage error |
//! | 3  | unparsable input (CSV, matrix dump) |
//! | 4  | invalid dataset (fewer than 2 rows or classes, non-finite feature) |
//! | 5  | fewer than 2 folds |
//! | 6  | more folds than rows |
//! | 7  | invalid parameters |
//! | 8  | sorted matrix exceeds the memory budget |
//! | 9  | I/O error |
//! | 10 | benchmark modes disagree |

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{bench, curves, load_dataset, run, run_mode, BenchResult, CURVE_FOLD_COUNTS};
pub use config::{Cli, Mode, RunConfig};
pub use error::{exit, CliError};
