//! Scalar abstraction: every numeric routine in this crate is generic over a
//! real floating-point type (`f32` or `f64`), and tensor contractions are
//! additionally generic over the amplitude field (real or complex).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, One, ToPrimitive, Zero};

/// Real floating-point scalar: `f32` or `f64`.
///
/// `FromStr`/`Display` are required so checkpoints and CSV reports round-trip
/// values exactly (Rust prints the shortest string that parses back to the
/// same bits).
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + FromStr
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to any Scalar")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to any Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Element type of a tensor contraction: either the real scalar itself or
/// `Complex<T>`. Keeps one contraction engine serving both fields.
pub trait Amplitude:
    Copy
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    type Real: Scalar;

    const IS_COMPLEX: bool;

    fn from_parts(re: Self::Real, im: Self::Real) -> Self;
    fn re(self) -> Self::Real;
    fn im(self) -> Self::Real;
    fn conj(self) -> Self;
    /// Squared modulus.
    fn abs_sq(self) -> Self::Real;
    /// Multiply by a real scalar.
    fn scale(self, s: Self::Real) -> Self;
}

impl<T: Scalar> Amplitude for T {
    type Real = T;

    const IS_COMPLEX: bool = false;

    #[inline]
    fn from_parts(re: T, _im: T) -> Self {
        re
    }

    #[inline]
    fn re(self) -> T {
        self
    }

    #[inline]
    fn im(self) -> T {
        T::zero()
    }

    #[inline]
    fn conj(self) -> Self {
        self
    }

    #[inline]
    fn abs_sq(self) -> T {
        self * self
    }

    #[inline]
    fn scale(self, s: T) -> Self {
        self * s
    }
}

impl<T: Scalar> Amplitude for Complex<T> {
    type Real = T;

    const IS_COMPLEX: bool = true;

    #[inline]
    fn from_parts(re: T, im: T) -> Self {
        Complex::new(re, im)
    }

    #[inline]
    fn re(self) -> T {
        self.re
    }

    #[inline]
    fn im(self) -> T {
        self.im
    }

    #[inline]
    fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }

    #[inline]
    fn abs_sq(self) -> T {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    fn scale(self, s: T) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_amplitude_behaves_like_scalar() {
        let a = 3.0f64;
        assert_eq!(a.conj(), 3.0);
        assert_eq!(a.abs_sq(), 9.0);
        assert_eq!(a.scale(2.0), 6.0);
        assert_eq!(<f64 as Amplitude>::from_parts(1.5, 9.9), 1.5);
    }

    #[test]
    fn complex_amplitude_conjugation_and_modulus() {
        let c = Complex::new(3.0f64, -4.0);
        assert_eq!(c.abs_sq(), 25.0);
        assert_eq!(c.conj(), Complex::new(3.0, 4.0));
        assert_eq!(c.scale(2.0), Complex::new(6.0, -8.0));
    }

    #[test]
    fn display_round_trips_through_parse() {
        let xs = [0.1f64, 1.0 / 3.0, 1e-300, -7.25];
        for x in xs {
            let s = format!("{x}");
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
