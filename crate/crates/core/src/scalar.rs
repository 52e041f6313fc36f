//! Scalar abstraction shared by every numeric routine in the crate.

use std::str::FromStr;

use ndarray::NdFloat;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the classifier can be trained and evaluated in: `f32` or `f64`.
///
/// The squared-exponential loss needs `exp`, so exact/rational scalars are not supported.
pub trait Scalar:
    NdFloat + FromPrimitive + ToPrimitive + FromStr + Default + Serialize + DeserializeOwned + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Finite stand-in for +∞ that survives JSON round-trips.
    fn pos_sentinel() -> Self {
        Self::max_value()
    }

    /// Finite stand-in for -∞.
    fn neg_sentinel() -> Self {
        Self::min_value()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
