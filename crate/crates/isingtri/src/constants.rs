//! Critical line, closed-form constants and rational parametrizations.
//!
//! On the critical line the generating functions are rational in an
//! auxiliary variable H: u = û(H), Z₀(u) = Ẑ₀(H). At ν_c the dominant
//! singularity sits at H = 1 where û′ has a double zero; for 1 ≤ ν < ν_c it
//! sits at H = S where û′ has a simple zero.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rational function num(H)/den(H), coefficients in ascending powers.
#[derive(Clone, Debug)]
pub struct RatFn<T> {
    pub num: Vec<T>,
    pub den: Vec<T>,
}

fn horner<T: Real>(c: &[T], h: &T) -> T {
    c.iter().rev().fold(T::zero(), |acc, a| acc * h.clone() + a.clone())
}

fn horner_c<T: Real>(c: &[T], h: &Complex<T>) -> Complex<T> {
    c.iter()
        .rev()
        .fold(Complex::new(T::zero(), T::zero()), |acc, a| acc * h.clone() + Complex::new(a.clone(), T::zero()))
}

/// Coefficients of p(h0 + e) in powers of e.
pub fn taylor_shift<T: Real>(c: &[T], h0: &T) -> Vec<T> {
    let mut a = c.to_vec();
    let n = a.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let v = a[j + 1].clone() * h0.clone();
            a[j] = a[j].clone() + v;
        }
    }
    a
}

/// a / b as power series truncated after degree `order`; needs b[0] ≠ 0.
pub fn series_div<T: Real>(a: &[T], b: &[T], order: usize) -> Vec<T> {
    let mut q = vec![T::zero(); order + 1];
    let b0 = b[0].clone();
    for n in 0..=order {
        let mut s = a.get(n).cloned().unwrap_or_else(T::zero);
        for k in 1..=n.min(b.len().saturating_sub(1)) {
            s = s - b[k].clone() * q[n - k].clone();
        }
        q[n] = s / b0.clone();
    }
    q
}

impl<T: Real> RatFn<T> {
    fn pole_check(&self, d: &T, at: f64) -> Result<()> {
        let scale = self.den.iter().map(|c| c.to_f64().abs()).fold(0.0, f64::max).max(1.0);
        if d.to_f64().abs() <= 1e-300 || d.abs() <= T::epsilon() * T::from_f64(scale) {
            return Err(Error::Pole(format!("denominator vanishes at H = {at}")));
        }
        Ok(())
    }

    pub fn eval(&self, h: &T) -> Result<T> {
        let d = horner(&self.den, h);
        self.pole_check(&d, h.to_f64())?;
        Ok(horner(&self.num, h) / d)
    }

    pub fn eval_c(&self, h: &Complex<T>) -> Result<Complex<T>> {
        let d = horner_c(&self.den, h);
        self.pole_check(&d.norm_sqr().sqrt(), h.re.to_f64())?;
        Ok(horner_c(&self.num, h) / d)
    }

    /// Taylor coefficients at h0 up to `order`.
    pub fn taylor(&self, h0: &T, order: usize) -> Result<Vec<T>> {
        let n = taylor_shift(&self.num, h0);
        let d = taylor_shift(&self.den, h0);
        self.pole_check(&d[0], h0.to_f64())?;
        Ok(series_div(&n, &d, order))
    }
}

fn c<T: Real>(n: i64, d: i64) -> T {
    T::ratio(n, d)
}

pub fn sqrt7<T: Real>() -> T {
    T::from_i64(7).sqrt()
}

/// S_c = (5 − √7)/9.
pub fn s_c<T: Real>() -> T {
    (T::from_i64(5) - sqrt7::<T>()) / T::from_i64(9)
}

/// ν_c = 1 + 1/√7.
pub fn nu_c<T: Real>() -> T {
    T::one() + T::one() / sqrt7::<T>()
}

/// S_perc = 1/2 − √3/6, the point where ν(S) = 1.
pub fn s_perc<T: Real>() -> T {
    c::<T>(1, 2) - T::from_i64(3).sqrt() / T::from_i64(6)
}

/// μ = (11 − 5√7)/(12√7 − 48).
pub fn mu<T: Real>() -> T {
    let s = sqrt7::<T>();
    (T::from_i64(11) - T::from_i64(5) * s.clone()) / (T::from_i64(12) * s - T::from_i64(48))
}

/// a₀ = 2^{2/3}/5.
pub fn a0<T: Real>() -> T {
    let c2 = T::from_i64(2).cbrt();
    c2.clone() * c2 / T::from_i64(5)
}

/// b = −(2/5)·2^{1/3}.
pub fn b_const<T: Real>() -> T {
    -(c::<T>(2, 5) * T::from_i64(2).cbrt())
}

pub fn nu_of_s<T: Real>(s: &T) -> Result<T> {
    if *s <= T::zero() || *s > s_c::<T>() * (T::one() + T::epsilon() * T::from_i64(16)) {
        return Err(Error::Domain(format!("S = {} outside (0, S_c]", s.to_f64())));
    }
    let s2 = s.clone() * s.clone();
    Ok(T::from_i64(3) * s.clone() * (T::one() - s.clone())
        / (T::from_i64(3) * s2 - T::from_i64(3) * s.clone() + T::one()))
}

/// Inverse of [`nu_of_s`] on (0, ν_c], from the quadratic 3(ν+1)S² − 3(ν+1)S + ν = 0.
pub fn s_of_nu<T: Real>(nu: &T) -> Result<T> {
    let nc = nu_c::<T>();
    if *nu <= T::zero() || *nu > nc.clone() * (T::one() + T::epsilon() * T::from_i64(16)) {
        return Err(Error::Domain(format!("ν = {} outside (0, ν_c]", nu.to_f64())));
    }
    let n1 = nu.clone() + T::one();
    let disc = T::from_i64(3) * n1.clone() * (T::from_i64(3) - nu.clone());
    if *nu >= nc {
        return Ok(s_c::<T>());
    }
    Ok(c::<T>(1, 2) - disc.sqrt() / (T::from_i64(6) * n1))
}

/// T_c(S) = −(6S²−10S+3)(3S−2)²/(864 S (S−1)³).
pub fn t_crit_s<T: Real>(s: &T) -> Result<T> {
    if *s <= T::zero() || *s > s_c::<T>() * (T::one() + T::epsilon() * T::from_i64(16)) {
        return Err(Error::Domain(format!("S = {} outside (0, S_c]", s.to_f64())));
    }
    let s = s.clone();
    let a = T::from_i64(6) * s.clone() * s.clone() - T::from_i64(10) * s.clone() + T::from_i64(3);
    let b = T::from_i64(3) * s.clone() - T::from_i64(2);
    let sm1 = s.clone() - T::one();
    Ok(-(a * b.clone() * b) / (T::from_i64(864) * s * sm1.clone() * sm1.clone() * sm1))
}

/// Critical edge weight t_c(ν) = T_c(S(ν))^{1/3}.
pub fn t_crit_of_nu<T: Real>(nu: &T) -> Result<T> {
    Ok(t_crit_s(&s_of_nu(nu)?)?.cbrt())
}

/// Closed form of u_c(S) = û(S; S).
pub fn u_c_of_s<T: Real>(s: &T) -> Result<T> {
    let s = s.clone();
    let one = T::one();
    let num = (T::from_i64(18) * s.clone() * s.clone() - T::from_i64(18) * s.clone() + T::from_i64(4))
        * T::from_i64(2).cbrt();
    let b = T::from_i64(3) * s.clone() - T::from_i64(2);
    let a = T::from_i64(6) * s.clone() * s.clone() - T::from_i64(10) * s.clone() + T::from_i64(3);
    let om = one - s.clone();
    let inner = b.clone() * b * a / (s.clone() * om.clone() * om.clone() * om.clone());
    if inner <= T::zero() {
        return Err(Error::Domain(format!("S = {}", s.to_f64())));
    }
    let inner23 = {
        let cr = inner.cbrt();
        cr.clone() * cr
    };
    Ok(num / (inner23 * s * om))
}

/// b̂(S), the singular coefficient below ν_c.
pub fn b_hat<T: Real>(s: &T) -> Result<T> {
    let sp = s_perc::<T>();
    if *s < sp || *s >= s_c::<T>() {
        return Err(Error::Domain(format!("S = {} outside [S_perc, S_c)", s.to_f64())));
    }
    let s = s.clone();
    let s2 = s.clone() * s.clone();
    let q = T::from_i64(9) * s2.clone() - T::from_i64(10) * s.clone() + T::from_i64(2);
    let r = T::from_i64(3) * s2.clone() * s2.clone() - T::from_i64(4) * s2.clone() * s.clone() + s2.clone();
    let cubic = -T::from_i64(18) * s2.clone() * s.clone() + T::from_i64(42) * s2.clone()
        - T::from_i64(29) * s.clone()
        + T::from_i64(6);
    let ratio = q.clone() / r;
    if ratio <= T::zero() {
        return Err(Error::Domain(format!("b̂ undefined at S = {}", s.to_f64())));
    }
    Ok(T::from_i64(4) * q.clone() * q / (ratio.sqrt() * s2 * cubic))
}

/// Sign convention for Â(H). `Printed` keeps the displayed form
/// 2^{2/3}H/(5H−10); `Corrected` flips it so that a_p > 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AConvention {
    #[default]
    Corrected,
    Printed,
}

pub fn a_hat<T: Real>(h: &Complex<T>, conv: AConvention) -> Result<Complex<T>> {
    let c23 = {
        let c = T::from_i64(2).cbrt();
        c.clone() * c
    };
    let den = match conv {
        AConvention::Corrected => Complex::new(T::from_i64(10), T::zero()) - h.clone() * T::from_i64(5),
        AConvention::Printed => h.clone() * T::from_i64(5) - Complex::new(T::from_i64(10), T::zero()),
    };
    if den.norm_sqr() <= T::epsilon() {
        return Err(Error::Pole("Â at H = 2".into()));
    }
    Ok(h.clone() * c23 / den)
}

/// Rational parametrization of (u, Z₀) at a point of the critical line.
#[derive(Clone, Debug)]
pub struct Parametrization<T> {
    pub nu: T,
    pub s: T,
    pub critical: bool,
    pub t_c: T,
    pub u: RatFn<T>,
    pub z0: RatFn<T>,
    /// Value of H at the dominant singularity (1 at ν_c, S below).
    pub h_c: T,
}

impl<T: Real> Parametrization<T> {
    /// The ν = ν_c parametrization.
    pub fn critical() -> Self {
        let s7 = sqrt7::<T>();
        let i = |n: i64| T::from_i64(n);
        let base = i(50) * s7.clone() - i(110);
        let base23 = {
            let c = base.cbrt();
            c.clone() * c
        };
        let cu = i(4) * (s7.clone() - i(4)) / base23;
        let cz = (s7.clone() - i(1)) * (s7.clone() - i(4)) / (i(5) * (i(5) * s7.clone() - i(11)));
        let u = RatFn {
            num: vec![T::zero(), cu.clone() * i(5), cu.clone() * i(-6), cu * i(2)],
            den: vec![i(-2), i(1)],
        };
        let quart = [
            i(44) - i(20) * s7.clone(),
            i(34) * s7.clone() - i(101),
            i(96) - i(20) * s7.clone(),
            i(4) * s7.clone() - i(44),
            i(8),
        ];
        let mut znum = vec![T::zero()];
        znum.extend(quart.iter().map(|q| q.clone() * cz.clone()));
        let z0 = RatFn { num: znum, den: vec![i(4), i(-4), i(1)] };
        let s = s_c::<T>();
        Parametrization {
            nu: nu_c::<T>(),
            t_c: t_crit_s(&s).expect("S_c in range").cbrt(),
            s,
            critical: true,
            u,
            z0,
            h_c: T::one(),
        }
    }

    /// High-temperature parametrization at S ∈ [S_perc, S_c).
    pub fn high_temperature(s: &T) -> Result<Self> {
        if *s < s_perc::<T>() * (T::one() - T::epsilon() * T::from_i64(16)) || *s >= s_c::<T>() {
            return Err(Error::Domain(format!("S = {} outside [S_perc, S_c)", s.to_f64())));
        }
        let s = s.clone();
        let i = |n: i64| T::from_i64(n);
        let tc = t_crit_s(&s)?;
        let tc23 = {
            let c = tc.cbrt();
            c.clone() * c
        };
        let sm1 = s.clone() - i(1);
        let s2 = s.clone() * s.clone();
        let s3 = s2.clone() * s.clone();
        let s4 = s2.clone() * s2.clone();
        let s5 = s4.clone() * s.clone();
        let ku = (i(2) - i(3) * s.clone()) / (tc23 * i(36) * s2.clone() * sm1.clone() * sm1);
        let u = RatFn {
            num: vec![
                T::zero(),
                ku.clone() * (-i(6) * s3.clone() + i(10) * s2.clone() - i(3) * s.clone()),
                ku.clone() * (i(2) - i(4) * s.clone()),
                ku * (i(3) * s.clone() - i(2)),
            ],
            den: vec![-(i(2) * s.clone()), i(1)],
        };
        let q = |n: i64, d: i64| T::ratio(n, d);
        let n0 = q(2, 3) * s4.clone() - q(2, 9) * s3.clone();
        let n1 = q(5, 2) * s5 - q(15, 2) * s4.clone() + q(19, 4) * s3.clone() - q(5, 6) * s2.clone();
        let n2 = -s4 + q(20, 3) * s3.clone() - q(53, 9) * s2.clone() + q(4, 3) * s.clone();
        let n3 = -(i(2) * s3) + s2.clone() + q(8, 9) * s.clone() - q(4, 9);
        let n4 = s2.clone() - q(4, 3) * s.clone() + q(4, 9);
        let kz = i(36)
            / (s2.clone()
                * (i(3) * s.clone() - i(2))
                * (i(6) * s2.clone() - i(10) * s.clone() + i(3)));
        let z0 = RatFn {
            num: vec![T::zero(), kz.clone() * n0, kz.clone() * n1, kz.clone() * n2, kz.clone() * n3, kz * n4],
            den: vec![i(4) * s2, -(i(4) * s.clone()), i(1)],
        };
        Ok(Parametrization {
            nu: nu_of_s(&s)?,
            t_c: tc.cbrt(),
            s: s.clone(),
            critical: false,
            u,
            z0,
            h_c: s,
        })
    }

    /// Parametrization for ν ∈ [1, ν_c]; ν within a few ulps of ν_c selects the critical form.
    pub fn for_nu(nu: &T) -> Result<Self> {
        let nc = nu_c::<T>();
        if (nu.clone() - nc.clone()).abs() <= T::epsilon() * T::from_i64(64) {
            return Ok(Self::critical());
        }
        if *nu < T::one() || *nu > nc {
            return Err(Error::Domain(format!("ν = {} outside [1, ν_c]", nu.to_f64())));
        }
        Self::high_temperature(&s_of_nu(nu)?)
    }

    pub fn u_hat(&self, h: &Complex<T>) -> Result<Complex<T>> {
        self.u.eval_c(h)
    }

    pub fn z0_hat(&self, h: &Complex<T>) -> Result<Complex<T>> {
        self.z0.eval_c(h)
    }

    pub fn u_c(&self) -> T {
        self.u.eval(&self.h_c).expect("no pole at the critical point")
    }

    /// Z₀(u_c).
    pub fn z0_c(&self) -> T {
        self.z0.eval(&self.h_c).expect("no pole at the critical point")
    }

    /// t_c/u_c, the probability of each C event under the full-plane law.
    pub fn ratio(&self) -> T {
        self.t_c.clone() / self.u_c()
    }

    /// 2(t_c/u_c)(1 + Z₀(u_c)), equal to 1 on the critical line.
    pub fn normalization(&self) -> T {
        T::from_i64(2) * self.ratio() * (T::one() + self.z0_c())
    }

    /// Order of the zero of û′ at H_c, plus one (3 at ν_c, 2 below).
    pub fn contact_order(&self) -> usize {
        if self.critical {
            3
        } else {
            2
        }
    }

    /// dZ₀/du at u_c, through H by the first non-vanishing Taylor coefficients.
    pub fn z0_prime_at_uc(&self) -> Result<T> {
        let k = self.contact_order();
        let tu = self.u.taylor(&self.h_c, k)?;
        let tz = self.z0.taylor(&self.h_c, k)?;
        let scale = T::from_f64(tu.iter().map(|c| c.to_f64().abs()).fold(0.0, f64::max));
        if tu[k].abs() <= T::epsilon().sqrt() * scale {
            return Err(Error::Precision("leading Taylor coefficient of û vanishes".into()));
        }
        Ok(tz[k].clone() / tu[k].clone())
    }

    /// E_∞[X₁] = t_c[(1 + Z₀(u_c))/u_c − Z₀′(u_c)].
    pub fn drift(&self) -> Result<T> {
        Ok(self.t_c.clone() * ((T::one() + self.z0_c()) / self.u_c() - self.z0_prime_at_uc()?))
    }

    /// u3 = û'''(1)/6 at ν_c, or û''(S)/2 below.
    pub fn u_leading(&self) -> Result<T> {
        let k = self.contact_order();
        Ok(self.u.taylor(&self.h_c, k)?[k].clone())
    }

    /// z_{1,0}(t_c) = Ẑ₀′(0)/û′(0).
    pub fn z10(&self) -> Result<T> {
        let tu = self.u.taylor(&T::zero(), 1)?;
        let tz = self.z0.taylor(&T::zero(), 1)?;
        Ok(tz[1].clone() / tu[1].clone())
    }

    /// Z(û(H), û(K)) from the solution of the functional equations.
    pub fn z_bivariate(&self, h: &Complex<T>, k: &Complex<T>) -> Result<Complex<T>> {
        let t = self.t_c.clone();
        let big_t = t.clone() * t.clone() * t.clone();
        let nu = self.nu.clone();
        let z1c = t.clone() * self.z10()?;
        let x = self.u_hat(h)?;
        let y = self.u_hat(k)?;
        let tiny = T::epsilon();
        if x.norm_sqr() <= tiny.clone() || y.norm_sqr() <= tiny {
            return Err(Error::Pole("Z(u,v) evaluated at u = 0 or v = 0".into()));
        }
        let fx = self.z0_hat(h)? * t.clone() / x.clone();
        let fy = self.z0_hat(k)? * t.clone() / y.clone();
        let ux = x * (t.clone() * t.clone());
        let uy = y * (t.clone() * t.clone());
        let one = Complex::new(T::one(), T::zero());
        let tz1 = |uu: &Complex<T>, f: &Complex<T>| -> Complex<T> {
            (uu.clone() * f.clone() * (one.clone() - f.clone() * nu.clone())
                - uu.clone() * uu.clone() * nu.clone()
                - (f.clone() - Complex::new(z1c.clone(), T::zero())) * (nu.clone() * big_t.clone()))
                / (nu.clone() * big_t.clone())
        };
        let num = ux.clone() * ux.clone() * uy.clone() * uy.clone()
            - ux.clone() * uy.clone() * (tz1(&ux, &fx) + tz1(&uy, &fy)) * big_t.clone();
        let den = ux.clone() * uy.clone() * (one - fx - fy) * big_t.clone()
            - (ux + uy) * (big_t.clone() * big_t);
        if den.norm_sqr() <= T::epsilon() * T::epsilon() {
            return Err(Error::Pole("removable singularity hit exactly".into()));
        }
        Ok(num / den)
    }

    pub fn tail_exponent(&self) -> T {
        if self.critical {
            T::ratio(7, 3)
        } else {
            T::ratio(5, 2)
        }
    }

    /// The roots of ∂_H û other than H_c: 5/2 at ν_c, the radical pair below.
    pub fn other_critical_points(&self) -> Vec<T> {
        if self.critical {
            return vec![T::ratio(5, 2)];
        }
        let s = self.s.clone();
        let s2 = s.clone() * s.clone();
        let i = |n: i64| T::from_i64(n);
        let disc = i(108) * s2.clone() * s2.clone() - i(192) * s2.clone() * s.clone() + i(108) * s2.clone()
            - i(20) * s.clone()
            + i(1);
        let base = i(6) * s2 - i(2) * s.clone() - i(1);
        let den = i(6) * s - i(4);
        if disc < T::zero() {
            return Vec::new();
        }
        let r = disc.sqrt();
        vec![(base.clone() + r.clone()) / den.clone(), (base - r) / den]
    }
}

/// Bivariate generating function Ẑ(H, K) at ν_c in closed form.
pub fn param_critical_z<T: Real>(h: &Complex<T>, k: &Complex<T>) -> Result<Complex<T>> {
    let two = Complex::new(T::from_i64(2), T::zero());
    let hm = h.clone() - two.clone();
    let km = k.clone() - two.clone();
    let hk = h.clone() + k.clone() - two;
    let small = T::epsilon();
    if hm.norm_sqr() <= small.clone() || km.norm_sqr() <= small.clone() || hk.norm_sqr() <= small {
        return Err(Error::Pole("Ẑ(H,K) at H, K or H+K = 2".into()));
    }
    let r = |n: i64, d: i64| Complex::new(T::ratio(n, d), T::zero());
    let k2 = k.clone() * k.clone();
    let k3 = k2.clone() * k.clone();
    let c3 = k3.clone() - k2.clone() * r(5, 1) + k.clone() * r(17, 2) - r(5, 1);
    let c2 = -k3.clone() * r(5, 1) + k2.clone() * r(24, 1) - k.clone() * r(313, 8) + r(22, 1);
    let c1 = k3.clone() * r(17, 2) - k2.clone() * r(313, 8) + k.clone() * r(245, 4) - r(33, 1);
    let c0 = -k3 * r(5, 1) + k2 * r(22, 1) - k.clone() * r(33, 1) + r(17, 1);
    let n = ((c3 * h.clone() + c2) * h.clone() + c1) * h.clone() + c0;
    Ok(-(h.clone() * k.clone() * n * r(8, 5)) / (hm.clone() * hm * km.clone() * km * hk))
}

/// Singular-expansion constants at ν_c.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalExpansion<T> {
    pub a0: T,
    pub b: T,
    pub a_at_uc: T,
    pub mu: T,
    pub u3: T,
}

impl<T: Real> CriticalExpansion<T> {
    pub fn new(conv: AConvention) -> Result<Self> {
        let p = Parametrization::<T>::critical();
        let u3 = p.u_leading()?;
        let one = Complex::new(T::one(), T::zero());
        // Â′(1) from the closed form: 2^{2/3}·10/(10 − 5H)² at H = 1, sign per convention
        let c23 = {
            let c = T::from_i64(2).cbrt();
            c.clone() * c
        };
        let a1 = c23 * T::from_i64(10) / T::from_i64(25);
        let a1 = match conv {
            AConvention::Corrected => a1,
            AConvention::Printed => -a1,
        };
        let b = -((p.u_c() / u3.clone()).cbrt()) * a1;
        let a_at_uc = a0::<T>() + a_hat(&one, conv)?.re;
        Ok(CriticalExpansion { a0: a0::<T>(), b, a_at_uc, mu: mu::<T>(), u3 })
    }

    /// (4/3)·|2 t_c a₀ (A(u_c) − a₀)/(b u_c)|.
    pub fn c_tilde_infinity(&self) -> T {
        let p = Parametrization::<T>::critical();
        let v = T::from_i64(2) * p.t_c.clone() * self.a0.clone() * (self.a_at_uc.clone() - self.a0.clone())
            / (self.b.clone() * p.u_c());
        T::ratio(4, 3) * v.abs()
    }
}

/// Summary of a point on the critical line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPoint<T> {
    pub nu: T,
    pub s: T,
    pub t_c: T,
    pub u_c: T,
    pub z0_c: T,
    pub tail_exponent: T,
    pub drift: T,
}

pub fn critical_point<T: Real>(nu: &T) -> Result<CriticalPoint<T>> {
    let p = Parametrization::for_nu(nu)?;
    Ok(CriticalPoint {
        nu: p.nu.clone(),
        s: p.s.clone(),
        t_c: p.t_c.clone(),
        u_c: p.u_c(),
        z0_c: p.z0_c(),
        tail_exponent: p.tail_exponent(),
        drift: p.drift()?,
    })
}

/// Drift of the full-plane perimeter process.
pub fn drift<T: Real>(nu: &T) -> Result<T> {
    Parametrization::for_nu(nu)?.drift()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Critical,
    HighTemperature,
}

/// c(λ) = (4/3)∫₀^∞ (1+r)^{−7/3}(λ+r)^{−7/3} dr at ν_c, (1+λ)^{−5/2} below.
pub fn c_lambda(lambda: f64, regime: Regime) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("λ = {lambda}")));
    }
    match regime {
        Regime::HighTemperature => Ok((1.0 + lambda).powf(-2.5)),
        Regime::Critical => {
            // r = s/(1−s) maps [0,1) onto [0,∞)
            let f = |s: f64| {
                if s >= 1.0 {
                    return 0.0;
                }
                let r = s / (1.0 - s);
                let jac = 1.0 / ((1.0 - s) * (1.0 - s));
                (1.0 + r).powf(-7.0 / 3.0) * (lambda + r).powf(-7.0 / 3.0) * jac
            };
            let out = quadrature::integrate(f, 0.0, 1.0, 1e-14);
            if !(out.error_estimate <= 1e-12 * out.integral.abs().max(1.0)) {
                return Err(Error::Quadrature(format!(
                    "c({lambda}): error estimate {} too large",
                    out.error_estimate
                )));
            }
            Ok(4.0 / 3.0 * out.integral)
        }
    }
}

/// c_∞(λ) = (4/3)μ/(c(λ)λ^{7/3}) at ν_c.
pub fn c_infinity(lambda: f64) -> Result<f64> {
    Ok(4.0 / 3.0 * mu::<f64>() / (c_lambda(lambda, Regime::Critical)? * lambda.powf(7.0 / 3.0)))
}

/// Γ(−1/3) and Γ(−4/3).
pub fn gamma_m13() -> f64 {
    statrs::function::gamma::gamma(-1.0 / 3.0)
}

pub fn gamma_m43() -> f64 {
    statrs::function::gamma::gamma(-4.0 / 3.0)
}

/// |b/Γ(−1/3)|, the limit of a_p u_c^p p^{4/3}.
pub fn a_p_amplitude() -> f64 {
    (b_const::<f64>() / gamma_m13()).abs()
}

/// Named constants at one ν, for reporting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstantsDump {
    pub nu: String,
    pub digits: usize,
    pub values: Vec<(String, String)>,
}

pub fn dump_constants<T: Real>(nu: &T, digits: usize, show: impl Fn(&T) -> String) -> Result<ConstantsDump> {
    let p = Parametrization::for_nu(nu)?;
    let mut values = vec![
        ("S".to_string(), show(&p.s)),
        ("t_c".to_string(), show(&p.t_c)),
        ("T_c".to_string(), show(&(p.t_c.clone() * p.t_c.clone() * p.t_c.clone()))),
        ("u_c".to_string(), show(&p.u_c())),
        ("Z0(u_c)".to_string(), show(&p.z0_c())),
        ("t_c/u_c".to_string(), show(&p.ratio())),
        ("normalization".to_string(), show(&p.normalization())),
        ("drift".to_string(), show(&p.drift()?)),
        ("tail_exponent".to_string(), show(&p.tail_exponent())),
    ];
    if p.critical {
        let e = CriticalExpansion::<T>::new(AConvention::Corrected)?;
        values.push(("a0".into(), show(&e.a0)));
        values.push(("b".into(), show(&e.b)));
        values.push(("A(u_c)".into(), show(&e.a_at_uc)));
        values.push(("mu".into(), show(&e.mu)));
        values.push(("u3".into(), show(&e.u3)));
        values.push(("c_tilde_inf".into(), show(&e.c_tilde_infinity())));
    } else {
        values.push(("b_hat".into(), show(&b_hat(&p.s)?)));
    }
    Ok(ConstantsDump { nu: show(nu), digits, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Hp;
    use num_traits::One;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nu_of_s_reference_points() {
        assert!(close(nu_of_s(&s_c::<f64>()).unwrap(), 1.0 + 1.0 / 7f64.sqrt(), 1e-15));
        assert!(close(nu_of_s(&s_perc::<f64>()).unwrap(), 1.0, 1e-15));
        assert!(nu_of_s(&1e-9f64).unwrap() < 1e-8);
        assert!(nu_of_s(&0.5f64).is_err());
    }

    #[test]
    fn t_crit_at_s_c() {
        let tc3 = t_crit_s(&s_c::<f64>()).unwrap();
        assert!(close(tc3, (25.0 * 7f64.sqrt() - 55.0) / 864.0, 1e-16));
        assert!(close(tc3.cbrt(), 0.2345162630, 1e-10));
    }

    #[test]
    fn t_crit_positive_on_grid() {
        let (a, b) = (s_perc::<f64>(), s_c::<f64>());
        for i in 1..=1000 {
            let s = a + (b - a) * i as f64 / 1000.0;
            assert!(t_crit_s(&s).unwrap() > 0.0);
        }
    }

    #[test]
    fn critical_values() {
        let p = Parametrization::<f64>::critical();
        assert!(close(p.u_c(), 0.683990378670, 1e-11));
        assert!(close(p.z0_c(), (2.0 * 7f64.sqrt() - 3.0) / 5.0, 1e-14));
        let o = p.u_hat(&Complex::new(0.0, 0.0)).unwrap();
        assert_eq!(o, Complex::new(0.0, 0.0));
        assert!(p.u_hat(&Complex::new(2.0, 0.0)).is_err());
        assert!(close(p.ratio(), 0.3428648565, 1e-10));
    }

    #[test]
    fn u_prime_zeros_at_nu_c() {
        let p = Parametrization::<f64>::critical();
        let t1 = p.u.taylor(&1.0, 3).unwrap();
        assert!(t1[1].abs() < 1e-14 && t1[2].abs() < 1e-14 && t1[3].abs() > 0.1);
        let t52 = p.u.taylor(&2.5, 2).unwrap();
        assert!(t52[1].abs() < 1e-14 && t52[2].abs() > 1e-3);
        assert!(close(p.u_leading().unwrap(), 2.0 * p.u_c(), 1e-13));
    }

    #[test]
    fn high_temperature_critical_point() {
        for nu in [1.05, 1.2, 1.35] {
            let p = Parametrization::<f64>::for_nu(&nu).unwrap();
            assert!(close(p.u_c(), u_c_of_s(&p.s).unwrap(), 1e-13));
            let t = p.u.taylor(&p.s, 2).unwrap();
            assert!(t[1].abs() < 1e-13);
            for r in p.other_critical_points() {
                assert!(p.u.taylor(&r, 1).unwrap()[1].abs() < 1e-10);
                assert!(r > p.s);
            }
        }
    }

    #[test]
    fn normalization_on_the_line() {
        for nu in [nu_c::<f64>(), 1.05, 1.2, 1.35] {
            let p = Parametrization::for_nu(&nu).unwrap();
            assert!(close(p.normalization(), 1.0, 1e-13), "ν = {nu}");
        }
    }

    #[test]
    fn drift_values() {
        assert!(close(drift(&nu_c::<f64>()).unwrap(), mu::<f64>(), 1e-12));
        assert!(close(mu::<f64>(), 0.1371459, 1e-7));
        for nu in [1.05, 1.1, 1.2, 1.3, 1.35] {
            assert!(drift(&nu).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn pure_gravity_limit() {
        let p = Parametrization::<f64>::for_nu(&(1.0 + 1e-4)).unwrap();
        assert!(close(p.ratio(), 1.0 / (2.0 * 3f64.sqrt()), 1e-3));
    }

    #[test]
    fn closed_form_z_solves_the_equations() {
        let p = Parametrization::<f64>::critical();
        for (h, k) in [(0.3, 0.5), (0.7, 0.2), (0.1, 0.9)] {
            let h = Complex::new(h, 0.05);
            let k = Complex::new(k, -0.02);
            let a = param_critical_z(&h, &k).unwrap();
            let b = p.z_bivariate(&h, &k).unwrap();
            assert!((a - b).norm() < 1e-11 * a.norm().max(1.0), "{a} vs {b}");
            let sw = param_critical_z(&k, &h).unwrap();
            assert!((a - sw).norm() < 1e-14);
        }
        assert_eq!(param_critical_z(&Complex::new(0.0, 0.0), &Complex::new(0.4, 0.0)).unwrap().norm(), 0.0);
    }

    #[test]
    fn removable_diagonal_singularity() {
        let vals: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|e| param_critical_z(&Complex::new(1.0 - e, 0.0), &Complex::new(1.0 - e, 0.0)).unwrap().re)
            .collect();
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!((vals[1] - vals[2]).abs() < (vals[0] - vals[1]).abs() + 1e-12);
    }

    #[test]
    fn high_temperature_bivariate_symmetric() {
        let p = Parametrization::<f64>::for_nu(&1.2).unwrap();
        let h = Complex::new(0.11, 0.03);
        let k = Complex::new(0.05, -0.04);
        let a = p.z_bivariate(&h, &k).unwrap();
        let b = p.z_bivariate(&k, &h).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn expansion_identities() {
        let e = CriticalExpansion::<f64>::new(AConvention::Corrected).unwrap();
        assert!(close(e.a0, 2f64.powf(2.0 / 3.0) / 5.0, 1e-15));
        assert!(close(e.b, b_const::<f64>(), 1e-14));
        assert!(close(e.a_at_uc - e.a0, e.a0, 1e-15));
        assert!(close(e.c_tilde_infinity(), 4.0 / 3.0 * mu::<f64>(), 1e-12));
        let printed = CriticalExpansion::<f64>::new(AConvention::Printed).unwrap();
        assert!(close(printed.c_tilde_infinity(), e.c_tilde_infinity(), 1e-12));
    }

    #[test]
    fn a0_radical_simplification() {
        let s7 = 7f64.sqrt();
        assert!(close((s7 - 1.0) * (4.0 - s7), 5.0 * s7 - 11.0, 1e-14));
    }

    #[test]
    fn c_lambda_values() {
        assert!(close(c_lambda(1.0, Regime::Critical).unwrap(), 4.0 / 11.0, 1e-12));
        assert!(close(c_lambda(1.0, Regime::HighTemperature).unwrap(), 2f64.powf(-2.5), 1e-15));
        assert!(close(c_infinity(1.0).unwrap(), 11.0 / 3.0 * mu::<f64>(), 1e-11));
        assert!(c_lambda(-1.0, Regime::Critical).is_err());
    }

    #[test]
    fn gamma_values() {
        assert!(close(gamma_m13(), -4.062353818, 1e-8));
        assert!(close(gamma_m43(), 3.046765364, 1e-8));
        assert!(close(a_p_amplitude(), 0.12405, 1e-4));
    }

    #[test]
    fn b_hat_positive() {
        let (a, b) = (s_perc::<f64>(), s_c::<f64>());
        for i in 0..200 {
            let s = a + 1e-6 + (b - a - 2e-6) * i as f64 / 199.0;
            assert!(b_hat(&s).unwrap() > 0.0);
        }
    }

    #[test]
    fn hp_sixty_digits() {
        let p = Parametrization::<Hp>::critical();
        let tol = Hp::ratio(1, 10).powi(58);
        assert!((p.normalization() - Hp::one()).abs() < tol);
        let z = (Hp::from_int(2) * sqrt7::<Hp>() - Hp::from_int(3)) / Hp::from_int(5);
        assert!((p.z0_c() - z).abs() < tol);
        assert!((p.drift().unwrap() - mu::<Hp>()).abs() < tol);
        let p12 = Parametrization::<Hp>::for_nu(&Hp::ratio(6, 5)).unwrap();
        assert!((p12.normalization() - Hp::one()).abs() < tol);
        assert!(p12.drift().unwrap().abs() < tol);
    }

    proptest! {
        #[test]
        fn s_of_nu_round_trip(nu in 0.01f64..1.377) {
            let s = s_of_nu(&nu).unwrap();
            prop_assert!((nu_of_s(&s).unwrap() - nu).abs() < 1e-13);
        }

        #[test]
        fn nu_of_s_increasing(a in 0.01f64..0.26, d in 1e-4f64..0.05) {
            let b = (a + d).min(s_c::<f64>());
            prop_assume!(b > a);
            prop_assert!(nu_of_s(&b).unwrap() > nu_of_s(&a).unwrap());
        }

        #[test]
        fn z_hat_symmetric(h in -0.5f64..0.9, k in -0.5f64..0.9, hi in -0.3f64..0.3, ki in -0.3f64..0.3) {
            let h = Complex::new(h, hi);
            let k = Complex::new(k, ki);
            let a = param_critical_z(&h, &k).unwrap();
            let b = param_critical_z(&k, &h).unwrap();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
