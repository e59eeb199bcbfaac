//! Scalar abstractions shared by the symbolic and numeric layers.
//!
//! The code-construction side works over exact coefficients (see
//! [`Coefficient`]); the decoding and simulation side is generic over any
//! [`Field`] for symbol arithmetic and over [`Real`] where floating-point
//! operations (norms, noise, dense solves) are needed.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Values that can be added, subtracted, multiplied and divided exactly
/// enough to carry peeling-decoder symbols.
pub trait Field:
    Clone + Debug + PartialEq + Num + Neg<Output = Self> + FromPrimitive + Send + Sync + 'static
{
}

impl<T> Field for T where
    T: Clone + Debug + PartialEq + Num + Neg<Output = Self> + FromPrimitive + Send + Sync + 'static
{
}

/// Floating-point scalars used by the numeric kernels.
pub trait Real: Field + Float + nalgebra::RealField + Copy + Display {}

impl<T> Real for T where T: Field + Float + nalgebra::RealField + Copy + Display {}

/// Exact polynomial coefficients.
pub trait Coefficient: Field + Signed + PartialOrd + ToPrimitive + Display {
    fn is_integer(&self) -> bool;
}

impl<I> Coefficient for Ratio<I>
where
    I: Integer + Signed + Clone + Debug + Display + Send + Sync + 'static,
    Ratio<I>: FromPrimitive + ToPrimitive,
{
    fn is_integer(&self) -> bool {
        Ratio::is_integer(self)
    }
}

/// Arbitrary-precision rational, the default exact coefficient type.
pub type Rational = Ratio<BigInt>;

/// Converts a machine integer into any coefficient type.
pub fn from_i64<T: FromPrimitive>(v: i64) -> T {
    T::from_i64(v).expect("integer representable in scalar type")
}
