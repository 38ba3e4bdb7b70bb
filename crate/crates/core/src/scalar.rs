//! Floating-point scalar used by the voting world and the surrogate network.

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + LinalgScalar + ScalarOperand + Send + Sync + Debug + Display + Default + 'static
{
    /// Converts an `f64` constant, panicking only if it is unrepresentable.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + LinalgScalar + ScalarOperand + Send + Sync + Debug + Display + Default + 'static
{
}

/// Independent sub-seed for `stream`, via one splitmix64 round.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_stream_and_seed() {
        assert_ne!(derive_seed(0, 0), derive_seed(0, 1));
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f32::of(0.5).as_f64(), 0.5);
        assert_eq!(f64::of(1e-3), 1e-3);
    }
}
