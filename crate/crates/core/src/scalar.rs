//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used throughout the pipeline: `f32` or `f64`.
///
/// `Display` must print the shortest string that parses back to the same
/// value, which holds for both primitive float types.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or configuration value.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Real type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn count(value: usize) -> Self {
        Self::lit(value as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    values.iter().copied().sum::<T>() / T::count(values.len())
}
