//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for random sampling and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Maximum of two scalars where `-inf` behaves as the identity.
pub(crate) fn max_of<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// `log(sum(exp(xs)))` without overflow; returns `-inf` for an empty input.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let peak = xs.iter().copied().fold(T::neg_infinity(), max_of);
    if peak == T::neg_infinity() {
        return peak;
    }
    let acc: T = xs.iter().map(|&x| (x - peak).exp()).sum();
    peak + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.5_f64, -1.0, 2.0];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_underflow() {
        let xs = [-2000.0_f64, -2000.0];
        assert!((log_sum_exp(&xs) - (-2000.0 + 2.0_f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }
}
