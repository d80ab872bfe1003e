//! Scalar abstraction shared by the numeric modules.
//!
//! `Real` is implemented for `f32`, `f64` and [`Hp`], a binary
//! floating point type carrying a fixed number of mantissa bits
//! (224 by default, a bit more than 67 decimal digits).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_traits::{Num, One, Zero};

pub trait Real:
    Clone + fmt::Debug + fmt::Display + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn cbrt(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn powf(&self, e: &Self) -> Self;

    /// Relative machine epsilon of the type.
    fn epsilon() -> Self;

    fn from_i64(n: i64) -> Self {
        Self::from_f64(n as f64)
    }

    /// `n / d` computed in the scalar type (exact inputs, one rounding).
    fn ratio(n: i64, d: i64) -> Self {
        Self::from_i64(n) / Self::from_i64(d)
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn powi(&self, n: i32) -> Self {
        let mut base = if n < 0 { Self::one() / self.clone() } else { self.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            k >>= 1;
        }
        acc
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
}

macro_rules! impl_real_prim {
    ($t:ty) => {
        impl Real for $t {
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            fn sqrt(&self) -> Self {
                <$t>::sqrt(*self)
            }
            fn cbrt(&self) -> Self {
                <$t>::cbrt(*self)
            }
            fn ln(&self) -> Self {
                <$t>::ln(*self)
            }
            fn exp(&self) -> Self {
                <$t>::exp(*self)
            }
            fn powf(&self, e: &Self) -> Self {
                <$t>::powf(*self, *e)
            }
            fn epsilon() -> Self {
                <$t>::EPSILON
            }
            fn abs(&self) -> Self {
                <$t>::abs(*self)
            }
            fn powi(&self, n: i32) -> Self {
                <$t>::powi(*self, n)
            }
        }
    };
}

impl_real_prim!(f32);
impl_real_prim!(f64);

static HP_BITS: AtomicUsize = AtomicUsize::new(224);

/// Set the mantissa width (in bits) used by newly created [`Hp`] values.
pub fn set_hp_bits(bits: usize) {
    HP_BITS.store(bits.max(64), AtomicOrdering::Relaxed);
}

pub fn hp_bits() -> usize {
    HP_BITS.load(AtomicOrdering::Relaxed)
}

/// Bits needed for `digits` significant decimal digits plus guard bits.
pub fn bits_for_digits(digits: usize) -> usize {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 16
}

type Big = FBig<HalfEven, 2>;

/// Multi-precision real with the precision set by [`set_hp_bits`].
#[derive(Clone)]
pub struct Hp(Big);

impl Hp {
    fn wrap(x: Big) -> Self {
        let bits = hp_bits();
        Hp(x.with_precision(bits).value())
    }

    pub fn from_int(n: i64) -> Self {
        Self::wrap(Big::from(n))
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        let dec = self.0.to_decimal().value();
        let shown = dec.with_precision(digits).value();
        format!("{}", shown)
    }
}

impl fmt::Debug for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hp({})", self.to_decimal(24))
    }
}

impl fmt::Display for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = (hp_bits() as f64 / std::f64::consts::LOG2_10) as usize;
        write!(f, "{}", self.to_decimal(digits.saturating_sub(4).max(8)))
    }
}

impl PartialEq for Hp {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for Hp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! hp_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Hp {
            type Output = Hp;
            fn $m(self, rhs: Hp) -> Hp {
                Hp::wrap($tr::$m(self.0, rhs.0))
            }
        }
    };
}

hp_binop!(Add, add);
hp_binop!(Sub, sub);
hp_binop!(Mul, mul);
hp_binop!(Div, div);
hp_binop!(Rem, rem);

impl Neg for Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-self.0)
    }
}

impl Zero for Hp {
    fn zero() -> Self {
        Hp::from_int(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == Big::ZERO
    }
}

impl One for Hp {
    fn one() -> Self {
        Hp::from_int(1)
    }
}

impl Num for Hp {
    type FromStrRadixErr = String;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        if radix != 10 {
            return Err(format!("unsupported radix {radix}"));
        }
        let d: dashu_float::DBig = s.parse().map_err(|e| format!("{e:?}"))?;
        let bits = hp_bits();
        let digits = (bits as f64 / std::f64::consts::LOG2_10) as usize + 2;
        let d = d.with_precision(digits).value();
        Ok(Hp(d.with_base::<2>().value().with_rounding::<HalfEven>().with_precision(bits).value()))
    }
}

impl std::str::FromStr for Hp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Num::from_str_radix(s, 10)
    }
}

impl Real for Hp {
    fn from_f64(x: f64) -> Self {
        Self::wrap(Big::try_from(x).expect("finite f64"))
    }
    fn from_i64(n: i64) -> Self {
        Hp::from_int(n)
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn sqrt(&self) -> Self {
        Self::wrap(self.0.sqrt())
    }
    fn cbrt(&self) -> Self {
        if self.0 == Big::ZERO {
            return self.clone();
        }
        if *self < Hp::zero() {
            return -(-self.clone()).cbrt();
        }
        Self::wrap(self.0.nth_root(3))
    }
    fn ln(&self) -> Self {
        Self::wrap(self.0.ln())
    }
    fn exp(&self) -> Self {
        Self::wrap(self.0.exp())
    }
    fn powf(&self, e: &Self) -> Self {
        Self::wrap(self.0.powf(&e.0))
    }
    fn epsilon() -> Self {
        Hp::from_int(2).powi(-(hp_bits() as i32) + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hp_sqrt_two_digits() {
        let s = Hp::from_int(2).sqrt();
        let sq = s.clone() * s;
        let err = (sq - Hp::from_int(2)).abs();
        assert!(err < Hp::ratio(1, 10).powi(60));
    }

    #[test]
    fn hp_ratio_not_truncated() {
        let third = Hp::ratio(1, 3);
        let back = third * Hp::from_int(3) - Hp::one();
        assert!(back.abs() < Hp::ratio(1, 10).powi(60));
    }

    #[test]
    fn hp_cbrt_negative() {
        let c = Hp::from_int(-27).cbrt();
        assert!((c + Hp::from_int(3)).abs() < Hp::ratio(1, 10).powi(60));
    }

    #[test]
    fn hp_parse_matches_f64() {
        let x: Hp = Num::from_str_radix("1.377964473009227227214516536234180060816", 10).unwrap();
        assert!((x.to_f64() - 1.377964473009227).abs() < 1e-15);
    }

    #[test]
    fn f64_powi_generic() {
        assert_eq!(<f64 as Real>::powi(&2.0, -2), 0.25);
        assert_eq!(Real::powi(&Hp::from_int(3), 4).to_f64(), 81.0);
    }
}
