//! Scalar abstractions.
//!
//! Closed-form game analytics only need field arithmetic, so they are
//! written against [`Field`] and work with exact rationals as well as
//! floats. Anything involving roots, logarithms or sampling needs
//! [`Scalar`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Ordered field arithmetic. Implemented for floats and `Ratio<i64>`.
pub trait Field: Num + Signed + Copy + PartialOrd + Debug + Display {}

impl<T> Field for T where T: Num + Signed + Copy + PartialOrd + Debug + Display {}

/// Floating-point scalar used by the numerical and stochastic parts of the crate.
pub trait Scalar: Field + Float + FromPrimitive + ToPrimitive + LowerExp + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn clamp01(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn two<T: Field>() -> T {
    T::one() + T::one()
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    // stable for large |x|
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub(crate) fn logit<T: Scalar>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

pub(crate) fn mean<T: Scalar>(xs: impl IntoIterator<Item = T>) -> Option<T> {
    let mut n = 0usize;
    let mut acc = T::zero();
    for x in xs {
        acc = acc + x;
        n += 1;
    }
    (n > 0).then(|| acc / T::from_count(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_logit_inverse() {
        for &p in &[1e-6, 0.1, 0.5, 0.7, 0.999] {
            let p: f64 = p;
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
        assert_eq!(sigmoid(800.0_f64), 1.0);
        assert_eq!(sigmoid(-800.0_f64), 0.0);
    }

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(std::iter::empty()), None);
        assert_eq!(mean([1.0_f32, 2.0, 3.0]), Some(2.0));
    }
}
