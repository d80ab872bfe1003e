//! Exact polynomials in the spin coupling ν.

use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Polynomial in ν with integer coefficients, `coeffs[i]` multiplies ν^i.
/// Trailing zeros are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NuPolynomial {
    coeffs: Vec<BigInt>,
}

impl NuPolynomial {
    pub fn from_coeffs<I: IntoIterator<Item = BigInt>>(it: I) -> Self {
        let mut p = NuPolynomial { coeffs: it.into_iter().collect() };
        p.trim();
        p
    }

    pub fn from_i64s(c: &[i64]) -> Self {
        Self::from_coeffs(c.iter().map(|&x| BigInt::from(x)))
    }

    /// The monomial ν.
    pub fn nu() -> Self {
        Self::from_i64s(&[0, 1])
    }

    pub fn monomial(deg: usize) -> Self {
        let mut c = vec![BigInt::zero(); deg + 1];
        c[deg] = BigInt::one();
        NuPolynomial { coeffs: c }
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }

    pub fn eval<T: Real>(&self, nu: &T) -> T {
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * nu.clone() + T::from_f64(c.to_f64().unwrap_or(f64::INFINITY));
        }
        acc
    }

    /// Exact value at an integer point.
    pub fn eval_int(&self, nu: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * nu + c;
        }
        acc
    }

    pub fn max_abs_coeff(&self) -> BigInt {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_default()
    }

    /// Multiply by ν in place.
    pub fn shift(&mut self) {
        if !self.coeffs.is_empty() {
            self.coeffs.insert(0, BigInt::zero());
        }
    }

    pub fn add_assign_ref(&mut self, rhs: &Self) {
        if rhs.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), BigInt::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self.trim();
    }

    pub fn sub_assign_ref(&mut self, rhs: &Self) {
        if rhs.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), BigInt::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self.trim();
    }

    /// `self += a * b` without allocating the product.
    pub fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        if a.coeffs.is_empty() || b.coeffs.is_empty() {
            return;
        }
        let len = a.coeffs.len() + b.coeffs.len() - 1;
        if len > self.coeffs.len() {
            self.coeffs.resize(len, BigInt::zero());
        }
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                self.coeffs[i + j] += x * y;
            }
        }
        self.trim();
    }
}

impl Zero for NuPolynomial {
    fn zero() -> Self {
        NuPolynomial { coeffs: Vec::new() }
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl One for NuPolynomial {
    fn one() -> Self {
        Self::from_i64s(&[1])
    }
}

impl Add for NuPolynomial {
    type Output = NuPolynomial;
    fn add(mut self, rhs: Self) -> Self {
        self.add_assign_ref(&rhs);
        self
    }
}

impl Mul for NuPolynomial {
    type Output = NuPolynomial;
    fn mul(self, rhs: Self) -> Self {
        let mut out = NuPolynomial::zero();
        out.mul_add_assign(&self, &rhs);
        out
    }
}

impl fmt::Display for NuPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
            } else if c.is_negative() {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            match (i, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (1, true) => write!(f, "ν")?,
                (1, false) => write!(f, "{a}ν")?,
                (_, true) => write!(f, "ν^{i}")?,
                (_, false) => write!(f, "{a}ν^{i}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_and_degree() {
        let p = NuPolynomial::from_i64s(&[0, 1, 1]);
        assert_eq!(p.to_string(), "ν^2 + ν");
        assert_eq!(p.degree(), Some(2));
        assert_eq!(NuPolynomial::zero().degree(), None);
    }

    #[test]
    fn shift_is_mul_by_nu() {
        let mut p = NuPolynomial::from_i64s(&[3, 2]);
        p.shift();
        assert_eq!(p, NuPolynomial::from_i64s(&[3, 2]) * NuPolynomial::nu());
    }

    fn poly() -> impl Strategy<Value = NuPolynomial> {
        proptest::collection::vec(-50i64..50, 0..6).prop_map(|v| NuPolynomial::from_i64s(&v))
    }

    proptest! {
        #[test]
        fn eval_is_ring_hom(a in poly(), b in poly(), x in -5i64..5) {
            let x = BigInt::from(x);
            prop_assert_eq!((a.clone() * b.clone()).eval_int(&x), a.eval_int(&x) * b.eval_int(&x));
            prop_assert_eq!((a.clone() + b.clone()).eval_int(&x), a.eval_int(&x) + b.eval_int(&x));
        }

        #[test]
        fn sub_inverts_add(a in poly(), b in poly()) {
            let mut s = a.clone() + b.clone();
            s.sub_assign_ref(&b);
            prop_assert_eq!(s, a);
        }
    }
}
