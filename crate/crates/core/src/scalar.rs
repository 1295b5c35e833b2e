//! Scalar abstraction for feature values and distances.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable for features and distances: `f32` or `f64`.
///
/// All arithmetic in the distance kernels goes through this trait, so a
/// matrix built over `f32` and one built over `f64` follow the same summation
/// order and differ only by rounding.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Debug + Display + Default + Send + Sync + 'static
{
    /// Short name used in reports and binary dumps.
    const NAME: &'static str;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
