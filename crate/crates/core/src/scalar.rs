use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the simulator and predictor are generic over.
///
/// Implemented for `f32` and `f64`. Random draws are produced in `f64` and
/// narrowed, so the same seed yields the same sample path (up to rounding)
/// for both widths.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Converts an `f64` literal; panics only if the type cannot hold it.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Standard normal CDF.
    #[inline]
    fn std_normal_cdf(self) -> Self {
        let half = Self::lit(0.5);
        half * (-self / Self::lit(std::f64::consts::SQRT_2)).erfc()
    }
}

impl Scalar for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(0.0f64.std_normal_cdf(), 0.5);
        // Phi(1.96) = 0.9750021048517795
        assert!((1.96f64.std_normal_cdf() - 0.975_002_104_851_779_5).abs() < 1e-15);
        assert!(((-1.96f64).std_normal_cdf() - 0.024_997_895_148_220_435).abs() < 1e-15);
        assert!((1.0f32.std_normal_cdf() - 0.841_344_7).abs() < 1e-6);
    }

    #[test]
    fn normal_cdf_saturates() {
        assert_eq!(40.0f64.std_normal_cdf(), 1.0);
        assert_eq!((-40.0f64).std_normal_cdf(), 0.0);
    }
}
