//! Scalar abstraction: the numeric core is generic over the float type.
//!
//! Everything numerical in this crate is written against [`Scalar`] so the
//! same code runs in `f32` or `f64`. The crate root exports concrete
//! aliases pinned to [`crate::Real`] (`f64`), which is what the trainer,
//! planner and CLI use.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssignOps};

pub trait Scalar:
    Float
    + NumAssignOps
    + ScalarOperand
    + LinalgScalar
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Max-shifted log of a sum of exponentials. Never overflows and returns
/// `-inf` only for an empty slice or all `-inf` entries.
pub fn logsumexp<S: Scalar>(xs: &[S]) -> S {
    let mut m = S::neg_infinity();
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut acc = S::zero();
    for &x in xs {
        acc += (x - m).exp();
    }
    m + acc.ln()
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_naive_on_small_inputs() {
        let xs = [0.3f64, -1.2, 2.0, 0.0];
        let naive: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(logsumexp(&xs), naive, max_relative = 1e-12);
    }

    #[test]
    fn logsumexp_survives_large_magnitudes() {
        let xs = [-1200.0f64, -1201.0, -1199.5];
        let v = logsumexp(&xs);
        assert!(v.is_finite());
        // Shift invariance against a well-scaled copy.
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1200.0).collect();
        assert_relative_eq!(v + 1200.0, logsumexp(&shifted), max_relative = 1e-12);
    }

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_relative_eq!(softplus(0.0f64), 2.0f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(softplus(50.0f64), 50.0, max_relative = 1e-10);
        assert!(softplus(-800.0f64) >= 0.0);
        assert!(softplus(-800.0f64) < 1e-300);
    }
}
