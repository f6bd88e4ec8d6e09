//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the datasets, models and explainers are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in tests assume `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, saturating to infinity on overflow.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| if v > 0.0 { Self::infinity() } else { Self::neg_infinity() })
    }

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Mean of a slice; zero for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

/// Population variance of a slice; zero for fewer than two values.
pub fn variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(xs.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion() {
        assert_eq!(<f32 as Scalar>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::lit(1e300), 1e300);
        assert!(<f32 as Scalar>::lit(1e300).is_infinite());
    }

    #[test]
    fn mean_and_variance() {
        assert_eq!(mean::<f64>(&[]), 0.0);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((variance(&[1.0f64, 2.0, 3.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(variance(&[4.0f64]), 0.0);
    }
}
