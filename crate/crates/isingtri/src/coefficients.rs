//! Numeric coefficient tables on the critical line.
//!
//! Coefficients of a function of u = u_c·x are read off a Cauchy integral
//! on the circle |x| = r just inside the unit disk. Each sample point is
//! mapped to the branch H(x) of û(H) = u_c·x with H(0) = 0, found by
//! continuation along the circle, so every integrand is an explicit
//! rational function of H. The bivariate ζ uses circles in both variables
//! for the square block p, q < n, and an exact power series in y for the
//! strip of large p and small q.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{a0, a_hat, param_critical_z, series_div, AConvention, Parametrization, RatFn};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CACHE_ENV: &str = "ISINGTRI_CACHE";
const CACHE_VERSION: u32 = 1;

fn mul_trunc<T: Real>(a: &[T], b: &[T], order: usize) -> Vec<T> {
    let mut out = vec![T::zero(); order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

/// Polynomial with coefficients `c` evaluated at the power series `h`.
fn poly_of_series<T: Real>(c: &[T], h: &[T], order: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); order + 1];
    for a in c.iter().rev() {
        acc = mul_trunc(&acc, h, order);
        acc[0] = acc[0].clone() + a.clone();
    }
    acc
}

/// f(h(x)) as a power series truncated after x^order.
pub fn compose_ratfn<T: Real>(f: &RatFn<T>, h: &[T], order: usize) -> Result<Vec<T>> {
    let n = poly_of_series(&f.num, h, order);
    let d = poly_of_series(&f.den, h, order);
    if d[0].is_zero() {
        return Err(Error::Pole("denominator vanishes at the expansion point".into()));
    }
    Ok(series_div(&n, &d, order))
}

fn poly_mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    mul_trunc(a, b, a.len() + b.len() - 2)
}

fn poly_derivative<T: Real>(c: &[T]) -> Vec<T> {
    c.iter().enumerate().skip(1).map(|(i, a)| a.clone() * T::from_i64(i as i64)).collect()
}

pub fn ratfn_derivative<T: Real>(f: &RatFn<T>) -> RatFn<T> {
    let a = poly_mul(&poly_derivative(&f.num), &f.den);
    let b = poly_mul(&f.num, &poly_derivative(&f.den));
    let len = a.len().max(b.len());
    let num = (0..len)
        .map(|i| a.get(i).cloned().unwrap_or_else(T::zero) - b.get(i).cloned().unwrap_or_else(T::zero))
        .collect();
    RatFn { num, den: poly_mul(&f.den, &f.den) }
}

/// Power series H(x) with û(H(x)) = u_c·x + O(x^{order+1}), by Newton
/// iteration on truncated series.
pub fn invert_series<T: Real>(param: &Parametrization<T>, order: usize) -> Result<Vec<T>> {
    let uc = param.u_c();
    let du = ratfn_derivative(&param.u);
    let d0 = du.eval(&T::zero())?;
    if d0.is_zero() {
        return Err(Error::Domain("û′(0) = 0".into()));
    }
    if !param.u.eval(&T::zero())?.is_zero() {
        return Err(Error::Domain("û(0) ≠ 0".into()));
    }
    let mut h = vec![T::zero(); order + 1];
    if order == 0 {
        return Ok(h);
    }
    h[1] = uc.clone() / d0;
    let mut prec = 1;
    let mut extra = 1;
    while prec < order || extra > 0 {
        if prec >= order {
            extra -= 1;
        }
        prec = (2 * prec).min(order);
        let f = compose_ratfn(&param.u, &h[..=prec], prec)?;
        let fp = compose_ratfn(&du, &h[..=prec], prec)?;
        let mut r: Vec<T> = f.into_iter().map(|v| v / uc.clone()).collect();
        r[1] = r[1].clone() - T::one();
        let fp: Vec<T> = fp.into_iter().map(|v| v / uc.clone()).collect();
        let corr = series_div(&r, &fp, prec);
        for (a, c) in h.iter_mut().zip(corr) {
            *a = a.clone() - c;
        }
    }
    let res = inversion_residual(param, &h)?;
    let tol = T::epsilon().sqrt();
    if res > tol {
        return Err(Error::Precision(format!("series inversion residual {}", res.to_f64())));
    }
    Ok(h)
}

/// max_k |[x^k](û(H(x))/u_c − x)| over the truncation order of `h`.
pub fn inversion_residual<T: Real>(param: &Parametrization<T>, h: &[T]) -> Result<T> {
    let order = h.len() - 1;
    let uc = param.u_c();
    let f = compose_ratfn(&param.u, h, order)?;
    let mut worst = T::zero();
    for (k, v) in f.into_iter().enumerate() {
        let mut d = v / uc.clone();
        if k == 1 {
            d = d - T::one();
        }
        worst = T::max_of(worst, d.abs());
    }
    Ok(worst)
}

/// The branch H(x) sampled at x_j = r·e^{2πij/m}.
#[derive(Clone, Debug)]
pub struct CirclePath {
    pub m: usize,
    pub r: f64,
    pub h: Vec<Complex64>,
}

struct PathSolver<'a> {
    param: &'a Parametrization<f64>,
    du: RatFn<f64>,
    uc: f64,
    hc: Complex64,
    expo: f64,
    r: f64,
}

impl PathSolver<'_> {
    fn x(&self, theta: f64) -> Complex64 {
        Complex64::from_polar(self.r, theta)
    }

    fn newton(&self, x: Complex64, mut h: Complex64) -> Option<Complex64> {
        let target = x * self.uc;
        for _ in 0..60 {
            let f = self.param.u.eval_c(&h).ok()? - target;
            // near H_c the root is ill-conditioned: stop at roundoff level
            if f.norm() <= 16.0 * f64::EPSILON * self.uc {
                return Some(h);
            }
            let d = self.du.eval_c(&h).ok()?;
            let step = f / d;
            if !step.is_finite() {
                return None;
            }
            h -= step;
            if step.norm() <= 1e-15 * h.norm().max(1.0) {
                return Some(h);
            }
        }
        None
    }

    /// Continue the branch from angle t0 (value h0) to t1.
    fn advance(&self, t0: f64, h0: Complex64, t1: f64, depth: usize) -> Result<Complex64> {
        let (x0, x1) = (self.x(t0), self.x(t1));
        let one = Complex64::new(1.0, 0.0);
        let pred = self.hc - (self.hc - h0) * ((one - x1) / (one - x0)).powf(self.expo);
        if let Some(h) = self.newton(x1, pred) {
            if (h - pred).norm() <= 0.05 * (self.hc - h0).norm() + 1e-12 {
                return Ok(h);
            }
        }
        if depth >= 40 {
            return Err(Error::Precision(format!("branch continuation stalled at θ = {t1}")));
        }
        let tm = 0.5 * (t0 + t1);
        let hm = self.advance(t0, h0, tm, depth + 1)?;
        self.advance(tm, hm, t1, depth + 1)
    }
}

impl CirclePath {
    pub fn new(param: &Parametrization<f64>, m: usize, r: f64) -> Result<Self> {
        if m < 8 || m % 2 == 1 || !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("circle with m = {m}, r = {r}")));
        }
        let uc = param.u_c();
        let hc = param.h_c;
        let target = uc * r;
        let (mut lo, mut hi) = (0.0, hc);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if param.u.eval(&mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-17 {
                break;
            }
        }
        let solver = PathSolver {
            param,
            du: ratfn_derivative(&param.u),
            uc,
            hc: Complex64::new(hc, 0.0),
            expo: 1.0 / param.contact_order() as f64,
            r,
        };
        let start = solver
            .newton(Complex64::new(r, 0.0), Complex64::new(0.5 * (lo + hi), 0.0))
            .ok_or_else(|| Error::Precision("no real preimage of u_c·r".into()))?;
        let mut h = vec![Complex64::new(0.0, 0.0); m];
        h[0] = start;
        let dt = 2.0 * PI / m as f64;
        for j in 1..=m / 2 {
            h[j] = solver.advance((j - 1) as f64 * dt, h[j - 1], j as f64 * dt, 0)?;
        }
        for j in m / 2 + 1..m {
            h[j] = h[m - j].conj();
        }
        Ok(CirclePath { m, r, h })
    }

    pub fn x(&self, j: usize) -> Complex64 {
        Complex64::from_polar(self.r, 2.0 * PI * j as f64 / self.m as f64)
    }

    /// [x^k]f for k ≤ kmax from samples f(x_j) (overwritten).
    pub fn coefficients(&self, values: &mut [Complex64], kmax: usize) -> Vec<f64> {
        let fft = FftPlanner::new().plan_fft_forward(self.m);
        fft.process(values);
        let lr = self.r.ln();
        let m = self.m as f64;
        (0..=kmax.min(self.m - 1)).map(|k| values[k].re / m * (-(k as f64) * lr).exp()).collect()
    }

    /// Coefficients of g(H(x)).
    pub fn extract<G>(&self, kmax: usize, g: G) -> Result<Vec<f64>>
    where
        G: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let mut vals: Vec<Complex64> = self.h.par_iter().map(|&h| g(h)).collect::<Result<_>>()?;
        Ok(self.coefficients(&mut vals, kmax))
    }
}

/// Least-squares fit of a sequence by Σ c_i k^{−e_i} in relative error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponents: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub k_lo: usize,
    pub k_hi: usize,
    pub max_rel_residual: f64,
}

/// Solve min ‖A c − b‖ by modified Gram–Schmidt.
fn lstsq(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a[0].len();
    let rows = a.len();
    let mut q: Vec<Vec<f64>> = (0..n).map(|j| a.iter().map(|r| r[j]).collect()).collect();
    let mut rmat = vec![vec![0.0; n]; n];
    for j in 0..n {
        for i in 0..j {
            let d: f64 = (0..rows).map(|k| q[i][k] * q[j][k]).sum();
            rmat[i][j] = d;
            for k in 0..rows {
                q[j][k] -= d * q[i][k];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-14 {
            return Err(Error::InsufficientData("collinear fit columns".into()));
        }
        rmat[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qb: Vec<f64> = (0..n).map(|j| (0..rows).map(|k| q[j][k] * b[k]).sum()).collect();
    let mut c = vec![0.0; n];
    for j in (0..n).rev() {
        let s: f64 = (j + 1..n).map(|i| rmat[j][i] * c[i]).sum();
        c[j] = (qb[j] - s) / rmat[j][j];
    }
    Ok(c)
}

/// Σ_{n≥0} (a+n)^{−s} for large a, by Euler–Maclaurin.
fn hurwitz_large(s: f64, a: f64) -> f64 {
    a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s) + s * a.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * a.powf(-s - 3.0) / 720.0
}

impl TailFit {
    pub fn fit(seq: &[f64], k_lo: usize, k_hi: usize, exponents: Vec<f64>) -> Result<Self> {
        if k_lo < 1 || k_hi >= seq.len() || k_hi <= k_lo + 4 * exponents.len() {
            return Err(Error::InsufficientData(format!("fit range [{k_lo}, {k_hi}] of {}", seq.len())));
        }
        let npts = 400.min(k_hi - k_lo + 1);
        let ratio = (k_hi as f64 / k_lo as f64).ln();
        let mut ks: Vec<usize> = (0..npts)
            .map(|i| (k_lo as f64 * (ratio * i as f64 / (npts - 1) as f64).exp()).round() as usize)
            .collect();
        ks.dedup();
        let scale: Vec<f64> = exponents.iter().map(|e| (k_lo as f64).powf(-e)).collect();
        let mut rows = Vec::with_capacity(ks.len());
        for &k in &ks {
            if seq[k] <= 0.0 {
                return Err(Error::Domain(format!("nonpositive entry at {k}")));
            }
            rows.push(
                exponents.iter().zip(&scale).map(|(e, s)| (k as f64).powf(-e) / s / seq[k]).collect::<Vec<_>>(),
            );
        }
        let c = lstsq(&rows, &vec![1.0; ks.len()])?;
        let coeffs: Vec<f64> = c.iter().zip(&scale).map(|(c, s)| c / s).collect();
        let mut fit = TailFit { exponents, coeffs, k_lo, k_hi, max_rel_residual: 0.0 };
        fit.max_rel_residual = ks.iter().map(|&k| (fit.value(k as f64) / seq[k] - 1.0).abs()).fold(0.0, f64::max);
        Ok(fit)
    }

    pub fn value(&self, k: f64) -> f64 {
        self.exponents.iter().zip(&self.coeffs).map(|(e, c)| c * k.powf(-e)).sum()
    }

    /// Σ_{j>k} of the fitted model.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.exponents.iter().zip(&self.coeffs).map(|(e, c)| c * hurwitz_large(*e, k as f64 + 1.0)).sum()
    }

    /// Σ_{j>k} j·(model), the first moment of the tail.
    pub fn tail_moment(&self, k: usize) -> f64 {
        self.exponents.iter().zip(&self.coeffs).map(|(e, c)| c * hurwitz_large(*e - 1.0, k as f64 + 1.0)).sum()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }
}

/// ζ_{p,q} = z_{p,q}(t_c)u_c^{p+q} for max(p,q) < pn and min(p,q) < qn.
/// Lookups are symmetric; on the square part both orders are averaged.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZetaTable {
    pub pn: usize,
    pub qn: usize,
    #[serde(skip)]
    data: Vec<f64>,
}

impl ZetaTable {
    pub fn new(pn: usize, qn: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != pn * qn || qn > pn {
            return Err(Error::Format("ζ table sizes inconsistent".into()));
        }
        Ok(ZetaTable { pn, qn, data })
    }

    /// Raw extracted value (p < pn, q < qn), before symmetrisation.
    pub fn raw(&self, p: usize, q: usize) -> f64 {
        self.data[p * self.qn + q]
    }

    pub fn get(&self, p: usize, q: usize) -> Option<f64> {
        let (a, b) = if p >= q { (p, q) } else { (q, p) };
        if a < self.qn {
            Some(0.5 * (self.raw(a, b) + self.raw(b, a)))
        } else if a < self.pn && b < self.qn {
            Some(self.raw(a, b))
        } else {
            None
        }
    }

    /// max |ζ_{p,q} − ζ_{q,p}| / ζ_{p,q} over p, q < lim.
    pub fn symmetry_defect(&self, lim: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 1..lim.min(self.qn) {
            for q in 1..p {
                let (a, b) = (self.raw(p, q), self.raw(q, p));
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
            }
        }
        worst
    }

    /// Largest relative difference from an independent strip extraction
    /// (`strip[p * sq + q]`, p < sp, q < sq).
    pub fn strip_defect(&self, strip: &[f64], sp: usize, sq: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 1..sp.min(self.pn) {
            for q in 1..sq.min(self.qn) {
                let a = self.raw(p, q);
                worst = worst.max((a - strip[p * sq + q]).abs() / a.abs());
            }
        }
        worst
    }

    pub fn write_bin(&self, path: &std::path::Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn read_bin(&mut self, path: &std::path::Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        if bytes.len() != 8 * self.pn * self.qn {
            return Err(Error::Format("ζ cache has the wrong size".into()));
        }
        self.data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(())
    }

    fn is_loaded(&self) -> bool {
        self.data.len() == self.pn * self.qn
    }
}

/// Block ζ_{p,q}, p < pn, q < qn, of F(H(x), H(y)) by a two-dimensional
/// trapezoidal rule, x on `px` and y on `py`.
pub fn zeta_rect<F>(px: &CirclePath, py: &CirclePath, pn: usize, qn: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(Complex64, Complex64) -> Result<Complex64> + Sync,
{
    let (mx, my) = (px.m, py.m);
    if pn > mx / 2 || qn > my / 2 {
        return Err(Error::Capacity { requested: pn.max(qn), budget: (mx / 2).min(my / 2) });
    }
    let fy: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(my);
    let half: Vec<Vec<Complex64>> = (0..=mx / 2)
        .into_par_iter()
        .map(|i| -> Result<Vec<Complex64>> {
            let hi = px.h[i];
            let mut row: Vec<Complex64> = py.h.iter().map(|&hj| f(hi, hj)).collect::<Result<_>>()?;
            fy.process(&mut row);
            row.truncate(qn);
            row.shrink_to_fit();
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let fx: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(mx);
    let (lx, ly) = (px.r.ln(), py.r.ln());
    let scale = 1.0 / (mx as f64 * my as f64);
    let cols: Vec<Vec<f64>> = (0..qn)
        .into_par_iter()
        .map(|q| {
            let mut col: Vec<Complex64> =
                (0..mx).map(|i| if i <= mx / 2 { half[i][q] } else { half[mx - i][q].conj() }).collect();
            fx.process(&mut col);
            (0..pn).map(|p| col[p].re * scale * (-(p as f64) * lx - q as f64 * ly).exp()).collect()
        })
        .collect();
    drop(half);
    let mut out = vec![0.0; pn * qn];
    for (q, col) in cols.iter().enumerate() {
        for (p, v) in col.iter().enumerate() {
            out[p * qn + q] = *v;
        }
    }
    Ok(out)
}

/// Square block on a single circle, row-major n × n.
pub fn zeta_square<F>(path: &CirclePath, n: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(Complex64, Complex64) -> Result<Complex64> + Sync,
{
    zeta_rect(path, path, n, n, f)
}

/// Coefficients of the cubic N(H, K) in the numerator of Ẑ at ν_c,
/// `NUM[i][j]` multiplying H^i K^j.
const NUM: [[f64; 4]; 4] = [
    [17.0, -33.0, 22.0, -5.0],
    [-33.0, 245.0 / 4.0, -313.0 / 8.0, 17.0 / 2.0],
    [22.0, -313.0 / 8.0, 24.0, -5.0],
    [-5.0, 17.0 / 2.0, -5.0, 1.0],
];

fn cmul_real_trunc(a: &[Complex64], b: &[f64], order: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        for (j, y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Strip ζ_{p,q}, p < pn, q < qn, at ν_c: for each x on the circle the
/// y-expansion of Ẑ(H(x), K(y)) is computed exactly from the series of
/// K(y) = H(y), then a single FFT in x per q.
pub fn zeta_strip(path: &CirclePath, kser: &[f64], pn: usize, qn: usize) -> Result<Vec<f64>> {
    let m = path.m;
    if pn > m / 2 || kser.len() < qn {
        return Err(Error::Capacity { requested: pn, budget: m / 2 });
    }
    let order = qn - 1;
    let k1: Vec<f64> = kser[..qn].to_vec();
    let k2 = mul_trunc(&k1, &k1, order);
    let k3 = mul_trunc(&k2, &k1, order);
    let kpow = [k1.clone(), k2, k3];
    let km2sq = poly_of_series(&[4.0, -4.0, 1.0], &k1, order);
    let g = series_div(&k1, &km2sq, order);
    let rows: Vec<Vec<Complex64>> = (0..=m / 2)
        .into_par_iter()
        .map(|i| -> Result<Vec<Complex64>> {
            let h = path.h[i];
            let hm2 = h - 2.0;
            if hm2.norm() < 1e-12 {
                return Err(Error::Pole("H = 2 on the circle".into()));
            }
            let mut d = [Complex64::new(0.0, 0.0); 4];
            for (j, dj) in d.iter_mut().enumerate() {
                *dj = ((Complex64::from(NUM[3][j]) * h + NUM[2][j]) * h + NUM[1][j]) * h + NUM[0][j];
            }
            let mut nser = vec![Complex64::new(0.0, 0.0); qn];
            nser[0] = d[0];
            for (j, kp) in kpow.iter().enumerate() {
                for (a, b) in nser.iter_mut().zip(kp) {
                    *a += d[j + 1] * b;
                }
            }
            let t = cmul_real_trunc(&nser, &g, order);
            // divide by (H − 2) + K(y)
            let mut s = vec![Complex64::new(0.0, 0.0); qn];
            for nn in 0..qn {
                let mut acc = t[nn];
                for k in 1..=nn {
                    acc -= s[nn - k] * k1[k];
                }
                s[nn] = acc / hm2;
            }
            let pre = -1.6 * h / (hm2 * hm2);
            Ok(s.into_iter().map(|v| v * pre).collect())
        })
        .collect::<Result<_>>()?;
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(m);
    let lr = path.r.ln();
    let mf = m as f64;
    let cols: Vec<Vec<f64>> = (0..qn)
        .into_par_iter()
        .map(|q| {
            let mut col: Vec<Complex64> = (0..m).map(|i| if i <= m / 2 { rows[i][q] } else { rows[m - i][q].conj() }).collect();
            fft.process(&mut col);
            (0..pn).map(|p| col[p].re / mf * (-(p as f64) * lr).exp()).collect()
        })
        .collect();
    let mut out = vec![0.0; pn * qn];
    for (q, col) in cols.iter().enumerate() {
        for (p, v) in col.iter().enumerate() {
            out[p * qn + q] = *v;
        }
    }
    Ok(out)
}

/// Small bivariate block from an arbitrary evaluator of Z(û(H), û(K)), on a
/// circle well inside the disk (enough for the first few coefficients).
pub fn zeta_block(param: &Parametrization<f64>, n: usize, m: usize, r: f64) -> Result<Vec<f64>> {
    let path = CirclePath::new(param, m, r)?;
    if param.critical {
        zeta_square(&path, n, |h, k| param_critical_z(&h, &k))
    } else {
        zeta_square(&path, n, |h, k| param.z_bivariate(&h, &k))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaConfig {
    pub log2_mx: u32,
    pub log2_my: u32,
    pub radius_gap: f64,
    pub pn: usize,
    pub qn: usize,
    /// Independent strip extraction used as a cross-check.
    pub strip_log2_m: u32,
    pub strip_p: usize,
    pub strip_q: usize,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        ZetaConfig {
            log2_mx: 16,
            log2_my: 12,
            radius_gap: 12.0,
            pn: 16384,
            qn: 1024,
            strip_log2_m: 16,
            strip_p: 16384,
            strip_q: 32,
        }
    }
}

/// What to extract and at which resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub nu: f64,
    pub log2_m: u32,
    /// The circle radius is 1 − radius_gap/m.
    pub radius_gap: f64,
    pub k_max: usize,
    /// Index up to which w is sampled from the table; beyond, the fitted tail.
    pub k_cut: usize,
    pub fit_lo: usize,
    pub zeta: Option<ZetaConfig>,
}

impl TableConfig {
    /// 1D sequences only, at any ν on the line.
    pub fn univariate(nu: f64) -> Self {
        TableConfig {
            nu,
            log2_m: 21,
            radius_gap: 12.0,
            k_max: 1 << 18,
            k_cut: 100_000,
            fit_lo: 10_000,
            zeta: None,
        }
    }

    /// Everything the samplers need at ν_c.
    pub fn critical() -> Self {
        TableConfig {
            nu: crate::constants::nu_c::<f64>(),
            zeta: Some(ZetaConfig::default()),
            ..Self::univariate(crate::constants::nu_c::<f64>())
        }
    }

    /// Smaller tables for quick checks.
    pub fn small(nu: f64, with_zeta: bool) -> Self {
        TableConfig {
            nu,
            log2_m: 16,
            radius_gap: 12.0,
            k_max: 8192,
            k_cut: 4096,
            fit_lo: 400,
            zeta: with_zeta.then(|| ZetaConfig {
                log2_mx: 12,
                log2_my: 10,
                radius_gap: 10.0,
                pn: 1024,
                qn: 256,
                strip_log2_m: 12,
                strip_p: 1024,
                strip_q: 16,
            }),
        }
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&(CACHE_VERSION, self)).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
    }

    fn radius(&self) -> f64 {
        1.0 - self.radius_gap / (1u64 << self.log2_m) as f64
    }
}

/// Diagnostics recorded while building the tables.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TableChecks {
    /// max |FFT coefficient of H − series coefficient| over the first 32.
    pub path_vs_series: f64,
    /// max relative change of w_k, k ≤ 10⁴, under a change of radius.
    pub radius_defect: f64,
    /// max relative ζ_{p,q} − ζ_{q,p} for p, q < 256.
    pub zeta_symmetry: f64,
    /// max relative difference between the block and the strip.
    pub zeta_strip: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientTables {
    pub config: TableConfig,
    pub nu: f64,
    pub critical: bool,
    /// Decimal digits carried by the stored values.
    pub digits: usize,
    pub t_c: f64,
    pub u_c: f64,
    /// Z₀(u_c) in closed form.
    pub z0_c: f64,
    /// w[k] = z_{k,0}(t_c)u_c^k, w[0] = 0.
    pub w: Vec<f64>,
    pub w_tail: TailFit,
    /// alpha[p] = a_p u_c^p (ν_c only).
    pub alpha: Vec<f64>,
    pub alpha_tail: Option<TailFit>,
    /// row_sums[p] = Σ_{q≥1} ζ_{p,q} (ν_c only).
    pub row_sums: Vec<f64>,
    pub zeta: Option<ZetaTable>,
    pub checks: TableChecks,
}

fn w_exponents(critical: bool) -> Vec<f64> {
    if critical {
        vec![7.0 / 3.0, 8.0 / 3.0, 10.0 / 3.0]
    } else {
        vec![2.5, 3.5, 4.5]
    }
}

impl CoefficientTables {
    pub fn build(config: &TableConfig) -> Result<Self> {
        let param = Parametrization::<f64>::for_nu(&config.nu)?;
        let m = 1usize << config.log2_m;
        if config.k_max >= m / 2 || config.k_cut > config.k_max || config.fit_lo * 4 > config.k_cut {
            return Err(Error::Domain("inconsistent table sizes".into()));
        }
        let path = CirclePath::new(&param, m, config.radius())?;
        let series = invert_series(&param, 32)?;
        let hc = path.extract(32, Ok)?;
        let path_vs_series = hc.iter().zip(&series).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if path_vs_series > 1e-8 {
            return Err(Error::Precision(format!("branch path disagrees with the series by {path_vs_series}")));
        }
        let mut w = path.extract(config.k_max, |h| param.z0_hat(&h))?;
        w[0] = 0.0;
        if let Some(k) = (1..=config.k_max).find(|&k| w[k] <= 0.0) {
            return Err(Error::Precision(format!("w_{k} = {} is not positive", w[k])));
        }
        let radius_defect = {
            let alt = CirclePath::new(&param, m, 1.0 - 1.5 * config.radius_gap / m as f64)?;
            let w2 = alt.extract(config.k_cut / 10, |h| param.z0_hat(&h))?;
            (1..w2.len()).map(|k| (w2[k] / w[k] - 1.0).abs()).fold(0.0, f64::max)
        };
        let w_tail = TailFit::fit(&w, config.fit_lo, config.k_cut, w_exponents(param.critical))?;
        let (mut alpha, mut alpha_tail, mut row_sums) = (Vec::new(), None, Vec::new());
        if param.critical {
            alpha = path.extract(config.k_max, |h| a_hat(&h, AConvention::Corrected))?;
            alpha[0] = a0::<f64>();
            alpha_tail = Some(TailFit::fit(&alpha, config.fit_lo, config.k_cut, vec![4.0 / 3.0, 5.0 / 3.0, 7.0 / 3.0])?);
            let one = Complex64::new(1.0, 0.0);
            row_sums = path.extract(config.k_max, |h| param_critical_z(&h, &one))?;
            row_sums[0] = 0.0;
        }
        let mut checks = TableChecks { path_vs_series, radius_defect, ..Default::default() };
        let zeta = match (&config.zeta, param.critical) {
            (Some(zc), true) => {
                let circle = |lg: u32| {
                    let mm = 1usize << lg;
                    CirclePath::new(&param, mm, 1.0 - zc.radius_gap / mm as f64)
                };
                let (px, py) = (circle(zc.log2_mx)?, circle(zc.log2_my)?);
                let data = zeta_rect(&px, &py, zc.pn, zc.qn, |h, k| param_critical_z(&h, &k))?;
                drop((px, py));
                let table = ZetaTable::new(zc.pn, zc.qn, data)?;
                let ps = circle(zc.strip_log2_m)?;
                let kser: Vec<f64> =
                    invert_series(&Parametrization::<crate::scalar::Hp>::critical(), zc.strip_q)?.iter().map(|v| v.to_f64()).collect();
                let strip = zeta_strip(&ps, &kser, zc.strip_p, zc.strip_q)?;
                checks.zeta_symmetry = table.symmetry_defect(256);
                checks.zeta_strip = table.strip_defect(&strip, zc.strip_p, zc.strip_q);
                Some(table)
            }
            (Some(_), false) => return Err(Error::Domain("bivariate tables are built at ν_c only".into())),
            _ => None,
        };
        Ok(CoefficientTables {
            config: config.clone(),
            nu: param.nu,
            critical: param.critical,
            digits: 15,
            t_c: param.t_c,
            u_c: param.u_c(),
            z0_c: param.z0_c(),
            w,
            w_tail,
            alpha,
            alpha_tail,
            row_sums,
            zeta,
            checks,
        })
    }

    /// Build, or read from `$ISINGTRI_CACHE/coeff-<hash>.json` (plus a
    /// raw `.zeta.bin` for the bivariate block) when the variable is set,
    /// writing the files after a fresh build.
    pub fn load_or_build(config: &TableConfig) -> Result<Self> {
        let Some(dir) = std::env::var_os(CACHE_ENV) else {
            return Self::build(config);
        };
        let json = PathBuf::from(dir).join(format!("coeff-{}.json", config.hash()));
        if let Ok(t) = Self::load(&json) {
            if t.config == *config {
                return Ok(t);
            }
        }
        let t = Self::build(config)?;
        t.save(&json)?;
        Ok(t)
    }

    fn zeta_path(json: &Path) -> PathBuf {
        json.with_extension("zeta.bin")
    }

    /// Write the tables as JSON, with the ζ block (if any) as raw
    /// little-endian f64 next to it (`<stem>.zeta.bin`).
    pub fn save(&self, json: &Path) -> Result<()> {
        if let Some(dir) = json.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        if let Some(z) = &self.zeta {
            let bin = Self::zeta_path(json);
            let tmp = bin.with_extension("tmp");
            z.write_bin(&tmp)?;
            std::fs::rename(&tmp, &bin)?;
        }
        let tmp = json.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, json)?;
        Ok(())
    }

    pub fn load(json: &Path) -> Result<Self> {
        let bytes = std::fs::read(json)?;
        let mut t = serde_json::from_slice::<CoefficientTables>(&bytes)?;
        if let Some(z) = t.zeta.as_mut() {
            z.read_bin(&Self::zeta_path(json))?;
            if !z.is_loaded() {
                return Err(Error::Format("ζ block has the wrong size".into()));
            }
        }
        Ok(t)
    }

    /// t_c/u_c.
    pub fn ratio(&self) -> f64 {
        self.t_c / self.u_c
    }

    pub fn k_max(&self) -> usize {
        self.w.len() - 1
    }

    /// w_k from the table, or the fitted tail beyond it.
    pub fn w_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else if k < self.w.len() {
            self.w[k]
        } else {
            self.w_tail.value(k as f64)
        }
    }

    pub fn alpha_at(&self, p: usize) -> Option<f64> {
        self.alpha.get(p).copied()
    }

    /// ζ_{p,q}, with ζ_{p,0} = w_p; `None` outside the stored tables.
    pub fn zeta_at(&self, p: usize, q: usize) -> Option<f64> {
        match (p, q) {
            (0, 0) => Some(0.0),
            (p, 0) => self.w.get(p).copied(),
            (0, q) => self.w.get(q).copied(),
            _ => self.zeta.as_ref()?.get(p, q),
        }
    }

    /// Σ_{k≤k_cut} w_k.
    pub fn w_partial(&self) -> f64 {
        self.w[1..=self.config.k_cut].iter().sum()
    }

    /// Z₀(u_c) estimated from the table plus the fitted tail.
    pub fn w_total_fitted(&self) -> f64 {
        self.w_partial() + self.w_tail.tail_sum(self.config.k_cut)
    }

    /// Σ_{k>k_cut} w_k from the closed form Z₀(u_c).
    pub fn w_tail_exact(&self) -> f64 {
        self.z0_c - self.w_partial()
    }

    /// 2(t/u)(1 + Σ w_k), the total mass of the full-plane law.
    pub fn normalization_infinite(&self) -> f64 {
        2.0 * self.ratio() * (1.0 + self.w_total_fitted())
    }

    /// Total mass of the half-plane law at boundary length p.
    pub fn normalization_halfplane(&self, p: usize) -> Result<f64> {
        if !self.critical || p == 0 || p + 1 >= self.alpha.len() {
            return Err(Error::MissingTable(format!("half-plane law at p = {p}")));
        }
        let a = &self.alpha;
        let small: f64 = (0..p).map(|k| a[p - k] * self.w[k + 1]).sum::<f64>() / a[p];
        let jump = a[0] * self.row_sums[p] / a[p];
        Ok(self.ratio() * (a[p + 1] / a[p] + 1.0 + self.w_total_fitted() + small + jump))
    }

    /// Total mass of the law with a monochromatic infinite boundary.
    pub fn normalization_mono(&self) -> Result<f64> {
        if !self.critical {
            return Err(Error::MissingTable("mono law needs a_p".into()));
        }
        Ok(self.ratio() * self.nu * (self.alpha[1] / self.alpha[0] + 1.0 + 2.0 * self.w_total_fitted()))
    }

    /// Σ over the events of the targeted finite law at (p, q), p, q ≥ 1.
    pub fn normalization_finite(&self, p: usize, q: usize) -> Result<f64> {
        let z = |a: usize, b: usize| {
            self.zeta_at(a, b).ok_or_else(|| Error::MissingTable(format!("ζ_{{{a},{b}}}")))
        };
        let zpq = z(p, q)?;
        let mut s = z(p + 1, q)? + z(p, q + 1)?;
        for k in 0..q {
            s += z(p, q - k)? * self.w[k + 1];
        }
        for k in 0..p {
            s += z(p - k, q)? * self.w[k + 1];
        }
        let mut total = self.ratio() * s / zpq;
        if p == 1 && q == 1 {
            total += self.t_c * self.u_c * self.u_c / zpq;
        }
        Ok(total)
    }

    /// Fit a_p u_c^p p^{4/3} ≈ A + B p^{−1/3} over [lo, hi], returning (A, B).
    pub fn alpha_amplitude(&self, lo: usize, hi: usize) -> Result<(f64, f64)> {
        if !self.critical || hi >= self.alpha.len() {
            return Err(Error::MissingTable("a_p".into()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=hi)
            .map(|p| {
                let pf = p as f64;
                (pf.powf(-1.0 / 3.0), self.alpha[p] * pf.powf(4.0 / 3.0))
            })
            .unzip();
        let fit = crate::scaling::least_squares(&xs, &ys)?;
        Ok((fit.intercept, fit.slope))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Hp;

    #[test]
    fn inversion_small_order() {
        let p = Parametrization::<f64>::critical();
        let h = invert_series(&p, 20).unwrap();
        assert_eq!(h[0], 0.0);
        let du = ratfn_derivative(&p.u).eval(&0.0).unwrap();
        assert!((h[1] - p.u_c() / du).abs() < 1e-15);
        assert!(inversion_residual(&p, &h).unwrap() < 1e-13);
    }

    #[test]
    fn inversion_high_precision() {
        let p = Parametrization::<Hp>::critical();
        let h = invert_series(&p, 50).unwrap();
        assert!(inversion_residual(&p, &h).unwrap() < Hp::from_f64(1e-40));
    }

    #[test]
    fn inversion_high_temperature() {
        let p = Parametrization::<f64>::for_nu(&1.2).unwrap();
        let h = invert_series(&p, 30).unwrap();
        assert!(inversion_residual(&p, &h).unwrap() < 1e-12);
    }

    #[test]
    fn derivative_of_ratfn() {
        let f = RatFn { num: vec![1.0, 2.0, 0.5], den: vec![3.0, -1.0] };
        let d = ratfn_derivative(&f);
        let x = 0.7;
        let e = 1e-6;
        let fd = (f.eval(&(x + e)).unwrap() - f.eval(&(x - e)).unwrap()) / (2.0 * e);
        assert!((d.eval(&x).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn path_matches_series() {
        for nu in [crate::constants::nu_c::<f64>(), 1.2] {
            let p = Parametrization::<f64>::for_nu(&nu).unwrap();
            let path = CirclePath::new(&p, 1 << 16, 1.0 - 12.0 / 65536.0).unwrap();
            let c = path.extract(20, Ok).unwrap();
            let s = invert_series(&p, 20).unwrap();
            for k in 0..=20 {
                assert!((c[k] - s[k]).abs() < 1e-10, "ν = {nu}, k = {k}: {} vs {}", c[k], s[k]);
            }
        }
    }

    #[test]
    fn tail_fit_exact_power_law() {
        let seq: Vec<f64> = (0..5000).map(|k| if k == 0 { 0.0 } else { 2.0 * (k as f64).powf(-2.5) }).collect();
        let fit = TailFit::fit(&seq, 100, 4000, vec![2.5]).unwrap();
        assert!((fit.leading() - 2.0).abs() < 1e-12);
        let direct: f64 = (4001..2_000_000).map(|k| 2.0 * (k as f64).powf(-2.5)).sum::<f64>();
        let rest = 2.0 * hurwitz_large(2.5, 2_000_000.0);
        assert!((fit.tail_sum(4000) - direct - rest).abs() < 1e-14);
    }

    #[test]
    fn small_tables_positive_and_normalised() {
        let t = CoefficientTables::build(&TableConfig::small(crate::constants::nu_c::<f64>(), true)).unwrap();
        assert!(t.w[1..].iter().all(|&v| v > 0.0));
        assert!(t.alpha.iter().all(|&v| v > 0.0));
        assert!((t.normalization_infinite() - 1.0).abs() < 1e-6);
        assert!((t.normalization_mono().unwrap() - 1.0).abs() < 1e-6);
        for p in [1, 5, 50] {
            assert!((t.normalization_halfplane(p).unwrap() - 1.0).abs() < 1e-6, "p = {p}");
        }
        let z = t.zeta.as_ref().unwrap();
        // extraction error grows like r^-p on the reduced grid
        assert!(z.symmetry_defect(64) < 1e-6, "{}", z.symmetry_defect(64));
        for (p, q) in [(1, 1), (3, 2), (10, 7)] {
            assert!((t.normalization_finite(p, q).unwrap() - 1.0).abs() < 1e-8, "({p},{q})");
        }
        assert!(t.checks.zeta_strip < 1e-5, "{}", t.checks.zeta_strip);
    }

    #[test]
    fn config_hash_changes_with_config() {
        let a = TableConfig::critical();
        let mut b = a.clone();
        b.k_cut += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), TableConfig::critical().hash());
    }
}
