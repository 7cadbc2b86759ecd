use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

/// Arithmetic used for lattice amplitudes and operator entries.
///
/// Two implementations exist: `f64` (fast, rounded) and `BigRational`
/// (exact). The two modes never mix inside one computation; a vector,
/// potential, and operator are all parameterized by the same `S`.
pub trait Scalar:
    Clone + fmt::Debug + fmt::Display + PartialOrd + Signed + Send + Sync + 'static
{
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    /// Nearest-float view of the value, for reporting only.
    fn to_f64(&self) -> f64;

    /// Rejects NaN/infinity at construction boundaries. Always true for
    /// exact scalars.
    fn is_valid(&self) -> bool;

    /// Rough size in bits, used as a growth guard for exact arithmetic.
    fn bit_size(&self) -> u64;

    fn mode_name() -> &'static str;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_valid(&self) -> bool {
        self.is_finite()
    }

    fn bit_size(&self) -> u64 {
        64
    }

    fn mode_name() -> &'static str {
        "float"
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_valid(&self) -> bool {
        true
    }

    fn bit_size(&self) -> u64 {
        self.numer().bits() + self.denom().bits()
    }

    fn mode_name() -> &'static str {
        "exact"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};

    #[test]
    fn rational_arithmetic_is_exact() {
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        let sum = third.clone() + third.clone() + third.clone();
        assert_eq!(sum, BigRational::one());
    }

    #[test]
    fn float_validity_rejects_non_finite() {
        assert!(1.5f64.is_valid());
        assert!(!f64::NAN.is_valid());
        assert!(!f64::INFINITY.is_valid());
        assert!(BigRational::zero().is_valid());
    }

    #[test]
    fn from_i64_round_trips() {
        assert_eq!(<f64 as Scalar>::from_i64(-7), -7.0);
        assert_eq!(Scalar::to_f64(&<BigRational as Scalar>::from_i64(-7)), -7.0);
    }

    #[test]
    fn bit_size_tracks_growth() {
        let mut x = BigRational::new(BigInt::from(3), BigInt::from(2));
        let start = x.bit_size();
        for _ in 0..10 {
            x = x.clone() * x.clone();
        }
        assert!(x.bit_size() > start * 100);
    }
}
