//! Finite Laurent polynomials in the delay indeterminate `D`.
//!
//! Every code matrix in this crate is built from these. Coefficients are
//! exact (rationals by default) so that divisions which must come out even
//! can be checked rather than assumed.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::{from_i64, Coefficient};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("division leaves a nonzero remainder")]
    NotDivisible,
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("span of the zero polynomial is undefined")]
    ZeroSpan,
    #[error("cannot evaluate a polynomial with negative exponents at zero")]
    EvalAtZero,
}

/// `sum_t coeffs[t] * D^(min_exp + t)`, always stored in canonical form.
///
/// Canonical form: the first and last coefficients are nonzero, and the zero
/// polynomial is `min_exp = 0` with no coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LaurentPoly<C> {
    min_exp: i64,
    coeffs: Vec<C>,
}

impl<C: Coefficient> LaurentPoly<C> {
    pub fn zero() -> Self {
        Self { min_exp: 0, coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::monomial(C::one(), 0)
    }

    /// `coeff * D^exp`.
    pub fn monomial(coeff: C, exp: i64) -> Self {
        Self::from_coeffs(exp, vec![coeff])
    }

    /// `D^exp`.
    pub fn d_pow(exp: i64) -> Self {
        Self::monomial(C::one(), exp)
    }

    /// Builds from a coefficient run starting at `min_exp`, canonicalizing.
    pub fn from_coeffs(min_exp: i64, coeffs: Vec<C>) -> Self {
        let mut p = Self { min_exp, coeffs };
        p.normalize();
        p
    }

    /// Integer coefficients, lowest exponent first.
    pub fn from_ints(min_exp: i64, coeffs: &[i64]) -> Self {
        Self::from_coeffs(min_exp, coeffs.iter().map(|&c| from_i64(c)).collect())
    }

    fn normalize(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead == self.coeffs.len() {
            self.coeffs.clear();
            self.min_exp = 0;
            return;
        }
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.min_exp += lead as i64;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest exponent present (0 for the zero polynomial).
    pub fn min_exp(&self) -> i64 {
        self.min_exp
    }

    /// Highest exponent present, `None` for zero.
    pub fn max_exp(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.min_exp + self.coeffs.len() as i64 - 1)
        }
    }

    /// Coefficients from `min_exp` upward.
    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// Coefficient of `D^exp` (zero outside the support).
    pub fn coeff(&self, exp: i64) -> C {
        let t = exp - self.min_exp;
        if t < 0 || t >= self.coeffs.len() as i64 {
            C::zero()
        } else {
            self.coeffs[t as usize].clone()
        }
    }

    /// Nonzero `(exponent, coefficient)` pairs in ascending exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &C)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(t, c)| (self.min_exp + t as i64, c))
    }

    /// Multiplies by `D^shift`.
    pub fn shift(&self, shift: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self { min_exp: self.min_exp + shift, coeffs: self.coeffs.clone() }
    }

    pub fn scale(&self, k: &C) -> Self {
        Self::from_coeffs(self.min_exp, self.coeffs.iter().map(|c| c.clone() * k.clone()).collect())
    }

    /// Max exponent minus min exponent.
    pub fn span(&self) -> Result<i64, PolyError> {
        self.max_exp().map(|hi| hi - self.min_exp).ok_or(PolyError::ZeroSpan)
    }

    pub fn max_abs_coeff(&self) -> C {
        self.coeffs.iter().map(|c| c.abs()).fold(C::zero(), |m, c| if c > m { c } else { m })
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(Coefficient::is_integer)
    }

    /// Numeric value at `x`.
    pub fn eval_at(&self, x: f64) -> Result<f64, PolyError> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if x == 0.0 && self.min_exp < 0 {
            return Err(PolyError::EvalAtZero);
        }
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        Ok(acc * x.powi(self.min_exp as i32))
    }

    /// Quotient `q` with `q * den == self` exactly.
    ///
    /// `D` is a unit in the Laurent ring, so both operands are stripped of
    /// their `D`-power before ordinary long division of the remaining cores.
    pub fn exact_div(&self, den: &Self) -> Result<Self, PolyError> {
        if den.is_zero() {
            return Err(PolyError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Self::zero());
        }
        let n = self.coeffs.len();
        let m = den.coeffs.len();
        if m > n {
            return Err(PolyError::NotDivisible);
        }
        let mut rem = self.coeffs.clone();
        let lead = den.coeffs[m - 1].clone();
        let mut quot = vec![C::zero(); n - m + 1];
        for t in (0..=n - m).rev() {
            let r = rem[t + m - 1].clone();
            if r.is_zero() {
                continue;
            }
            let f = r / lead.clone();
            for (u, d) in den.coeffs.iter().enumerate() {
                let v = rem[t + u].clone() - f.clone() * d.clone();
                rem[t + u] = v;
            }
            quot[t] = f;
        }
        if rem.iter().any(|c| !c.is_zero()) {
            return Err(PolyError::NotDivisible);
        }
        Ok(Self::from_coeffs(self.min_exp - den.min_exp, quot))
    }
}

impl<C: Coefficient> Default for LaurentPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> Add for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;

    fn add(self, rhs: Self) -> LaurentPoly<C> {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let lo = self.min_exp.min(rhs.min_exp);
        let hi = self.max_exp().unwrap().max(rhs.max_exp().unwrap());
        let coeffs = (lo..=hi).map(|e| self.coeff(e) + rhs.coeff(e)).collect();
        LaurentPoly::from_coeffs(lo, coeffs)
    }
}

impl<C: Coefficient> Sub for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;

    fn sub(self, rhs: Self) -> LaurentPoly<C> {
        self + &(-rhs)
    }
}

impl<C: Coefficient> Neg for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;

    fn neg(self) -> LaurentPoly<C> {
        LaurentPoly { min_exp: self.min_exp, coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }
}

impl<C: Coefficient> Mul for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;

    fn mul(self, rhs: Self) -> LaurentPoly<C> {
        if self.is_zero() || rhs.is_zero() {
            return LaurentPoly::zero();
        }
        let mut out = vec![C::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (a, ca) in self.coeffs.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (b, cb) in rhs.coeffs.iter().enumerate() {
                out[a + b] = out[a + b].clone() + ca.clone() * cb.clone();
            }
        }
        LaurentPoly::from_coeffs(self.min_exp + rhs.min_exp, out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<C: Coefficient> $tr for LaurentPoly<C> {
            type Output = LaurentPoly<C>;
            fn $m(self, rhs: Self) -> LaurentPoly<C> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<C: Coefficient> Neg for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn neg(self) -> LaurentPoly<C> {
        -&self
    }
}

impl<C: Coefficient> Zero for LaurentPoly<C> {
    fn zero() -> Self {
        LaurentPoly::zero()
    }
    fn is_zero(&self) -> bool {
        LaurentPoly::is_zero(self)
    }
}

impl<C: Coefficient> One for LaurentPoly<C> {
    fn one() -> Self {
        LaurentPoly::one()
    }
}

/// Renders as `c_m*D^m + ... + c_0`, exponents descending.
///
/// Unit coefficients are omitted (`-D^2 - D - 1`), `D^1` is written `D`,
/// and non-integer coefficients appear as `p/q`.
impl<C: Coefficient> fmt::Display for LaurentPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let terms: Vec<_> = self.terms().collect();
        for (idx, (exp, c)) in terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (idx, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let unit = mag.is_one();
            match *exp {
                0 => write!(f, "{mag}")?,
                e => {
                    if !unit {
                        write!(f, "{mag}*")?;
                    }
                    if e == 1 {
                        f.write_str("D")?;
                    } else {
                        write!(f, "D^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl<C: Coefficient> fmt::Debug for LaurentPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentPoly({self})")
    }
}

/// `1 + D^step + D^(2 step) + ... + D^(count-1)*step`, shifted by `D^shift`.
pub fn geometric<C: Coefficient>(shift: i64, step: i64, count: usize) -> LaurentPoly<C> {
    let mut coeffs = vec![C::zero(); (count.max(1) - 1) * step as usize + 1];
    if count == 0 {
        return LaurentPoly::zero();
    }
    for r in 0..count {
        coeffs[r * step as usize] = C::one();
    }
    LaurentPoly::from_coeffs(shift, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_bigint::BigInt;

    type P = LaurentPoly<Rational>;

    fn p(min: i64, c: &[i64]) -> P {
        P::from_ints(min, c)
    }

    #[test]
    fn canonical_zero() {
        let z = p(3, &[0, 0]);
        assert!(z.is_zero());
        assert_eq!(z.min_exp(), 0);
        assert_eq!(z, P::zero());
        let d = p(1, &[1]);
        assert_eq!(&d + &(-&d), P::zero());
    }

    #[test]
    fn add_examples() {
        // (D+1) + D^2
        assert_eq!(&p(0, &[1, 1]) + &p(2, &[1]), p(0, &[1, 1, 1]));
        // (D+1) + (-D-1+D^3) = D^3
        let s = &p(0, &[1, 1]) + &p(0, &[-1, -1, 0, 1]);
        assert_eq!(s, p(3, &[1]));
        assert_eq!(s.min_exp(), 3);
    }

    #[test]
    fn mul_examples() {
        assert_eq!(&p(0, &[-1, 1]) * &p(0, &[1, 1]), p(0, &[-1, 0, 1]));
        assert_eq!(&p(0, &[1, 1]) * &p(0, &[1, 1, 1]), p(0, &[1, 2, 2, 1]));
        let q = p(-2, &[3, 0, -1]);
        assert_eq!(&P::one() * &q, q);
        assert_eq!((&q * &p(4, &[1])).min_exp(), 2);
    }

    #[test]
    fn exact_div_examples() {
        assert_eq!(p(0, &[-1, 0, 1]).exact_div(&p(0, &[-1, 1])).unwrap(), p(0, &[1, 1]));
        assert_eq!(p(0, &[-1, 0, 0, 1]).exact_div(&p(0, &[-1, 1])).unwrap(), p(0, &[1, 1, 1]));
        // (D^5 - D) / (1 - D) = -(D^4 + D^3 + D^2 + D)
        let q = p(1, &[-1, 0, 0, 0, 1]).exact_div(&p(0, &[1, -1])).unwrap();
        assert_eq!(q, p(1, &[-1, -1, -1, -1]));
        assert_eq!(&q * &p(0, &[1, -1]), p(1, &[-1, 0, 0, 0, 1]));
    }

    #[test]
    fn exact_div_errors() {
        assert_eq!(p(0, &[1, 1]).exact_div(&P::zero()), Err(PolyError::DivisionByZero));
        assert_eq!(p(0, &[1]).exact_div(&p(0, &[1, 1])), Err(PolyError::NotDivisible));
        assert_eq!(p(0, &[1, 0, 1]).exact_div(&p(0, &[1, 1])), Err(PolyError::NotDivisible));
        // D is a unit: D / D^3 = D^-2
        assert_eq!(p(1, &[1]).exact_div(&p(3, &[1])).unwrap(), p(-2, &[1]));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p(0, &[1, 0, 1]).eval_at(2.0).unwrap(), 5.0);
        assert_eq!(P::zero().eval_at(3.7).unwrap(), 0.0);
        assert_eq!(p(-1, &[1]).eval_at(0.0), Err(PolyError::EvalAtZero));
        assert_eq!(p(-1, &[1]).eval_at(4.0).unwrap(), 0.25);
    }

    #[test]
    fn span_and_coeff_stats() {
        assert_eq!(p(1, &[1]).span().unwrap(), 0);
        assert_eq!(p(1, &[1, 1]).span().unwrap(), 1);
        assert_eq!(p(0, &[-1, -1, -1]).span().unwrap(), 2);
        assert_eq!(P::zero().span(), Err(PolyError::ZeroSpan));
        assert_eq!(p(0, &[-1, -1, -1]).max_abs_coeff(), Rational::from_integer(BigInt::from(1)));
        let half = P::monomial(Rational::new(BigInt::from(1), BigInt::from(2)), 1);
        assert!(!half.is_integral());
        assert!(p(0, &[3, -4]).is_integral());
    }

    #[test]
    fn rendering() {
        assert_eq!(p(0, &[-1, -1, -1]).to_string(), "-D^2 - D - 1");
        assert_eq!(p(1, &[1, 1]).to_string(), "D^2 + D");
        assert_eq!(p(0, &[1, 2, 0, -3]).to_string(), "-3*D^3 + 2*D + 1");
        assert_eq!(P::zero().to_string(), "0");
        assert_eq!(p(-2, &[1]).to_string(), "D^-2");
        let half = P::monomial(Rational::new(BigInt::from(-1), BigInt::from(2)), 1);
        assert_eq!(half.to_string(), "-1/2*D");
    }

    #[test]
    fn geometric_runs() {
        assert_eq!(geometric::<Rational>(0, 1, 3), p(0, &[1, 1, 1]));
        assert_eq!(geometric::<Rational>(3, 2, 2), p(3, &[1, 0, 1]));
        assert!(geometric::<Rational>(0, 1, 0).is_zero());
    }
}
