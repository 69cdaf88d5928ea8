//! Scalar abstraction shared by systems, observations and mechanisms.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for probabilities and observation coordinates.
///
/// Implemented for `f32` and `f64`. Risk values produced by the estimators are
/// always accumulated in `f64`; the scalar only governs storage of channels,
/// priors and observations.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + FromStr + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Absolute tolerance for "sums to one" checks on priors and channel rows.
    const STOCHASTIC_TOL: f64;

    /// Converts from `f64`, rounding to the nearest representable value.
    fn of(x: f64) -> Self;

    /// Widens to `f64`.
    fn to_f64_lossless(self) -> f64;

    /// Bit pattern that identifies a coordinate exactly. `-0.0` and `0.0`
    /// share a key.
    fn key_bits(self) -> u64;
}

macro_rules! impl_real {
    ($t:ty, $tol:expr) => {
        impl Real for $t {
            const STOCHASTIC_TOL: f64 = $tol;

            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossless(self) -> f64 {
                self as f64
            }

            #[inline]
            fn key_bits(self) -> u64 {
                (self + 0.0).to_bits() as u64
            }
        }
    };
}

impl_real!(f64, 1e-9);
// f32 cannot resolve 1e-9 around 1.0.
impl_real!(f32, 1e-5);
