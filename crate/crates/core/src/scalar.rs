//! Scalar abstraction for the numerical kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::StreamRng;

/// Floating-point scalar the kernels are generic over.
///
/// Implemented for `f32` and `f64`. Beyond the `num-traits` bounds, this
/// adds conversions for minting constants, plus a standard-normal draw so
/// generic code does not need to carry `rand_distr` bounds around.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Name recorded in run metadata so outputs state their precision.
    const NAME: &'static str;

    /// Conversion from `f64`, used for constants and configuration values.
    fn of(x: f64) -> Self;

    /// Widening (or identity) conversion to `f64` for reporting.
    fn as_f64(self) -> f64;

    /// One standard-normal draw from the stream.
    fn standard_normal(rng: &mut StreamRng) -> Self;
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn standard_normal(rng: &mut StreamRng) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }

    #[inline]
    fn standard_normal(rng: &mut StreamRng) -> Self {
        rng.sample(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_exactly_for_representable_values() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(0.25f32.as_f64(), 0.25);
        assert_eq!(f64::NAME, "f64");
        assert_eq!(f32::NAME, "f32");
    }

    #[test]
    fn standard_normal_draws_depend_only_on_seed_and_stream() {
        let mut a = StreamRng::new(7, 1);
        let mut b = StreamRng::new(7, 1);
        for _ in 0..100 {
            assert_eq!(
                f64::standard_normal(&mut a).to_bits(),
                f64::standard_normal(&mut b).to_bits()
            );
        }
    }
}
