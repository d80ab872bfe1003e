//! Partition functions z_{p,q}(t, ν) as truncated power series in t.
//!
//! Coefficients are produced order by order from the peeling recursion:
//! deleting the root edge either exposes a new vertex (two perimeter
//! increments) or splits off a monochromatic hole. A map of the (p,q)-gon
//! has at least ceil((p+q)/2) edges, so [tⁿ]z_{p,q} vanishes for p+q > 2n
//! and each order only involves finitely many perimeters.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::NuPolynomial;
use crate::scalar::Real;

/// Coefficient ring for the recursion: exact ν-polynomials or reals at a fixed ν.
pub trait SeriesRing: Clone + Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign_ref(&mut self, rhs: &Self);
    fn sub_assign_ref(&mut self, rhs: &Self);
    fn mul_add_assign(&mut self, a: &Self, b: &Self);
    /// Size used in residual reports (max |coefficient| for polynomials).
    fn magnitude(&self) -> f64;

    fn mul_ref(&self, b: &Self) -> Self {
        let mut z = Self::zero();
        z.mul_add_assign(self, b);
        z
    }
}

impl SeriesRing for NuPolynomial {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        NuPolynomial::add_assign_ref(self, rhs)
    }
    fn sub_assign_ref(&mut self, rhs: &Self) {
        NuPolynomial::sub_assign_ref(self, rhs)
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        NuPolynomial::mul_add_assign(self, a, b)
    }
    fn magnitude(&self) -> f64 {
        self.max_abs_coeff().to_f64().unwrap_or(f64::INFINITY)
    }
}

impl<T: Real> SeriesRing for T {
    fn zero() -> Self {
        T::zero()
    }
    fn one() -> Self {
        T::one()
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self = self.clone() + rhs.clone();
    }
    fn sub_assign_ref(&mut self, rhs: &Self) {
        *self = self.clone() - rhs.clone();
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self = self.clone() + a.clone() * b.clone();
    }
    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
}

/// Truncated series Σ_{n ≤ order} coeffs[n] tⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TSeries<R> {
    pub order: usize,
    pub coeffs: Vec<R>,
}

impl<R: SeriesRing> TSeries<R> {
    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }
}

impl TSeries<NuPolynomial> {
    pub fn at_nu<T: Real>(&self, nu: &T) -> TSeries<T> {
        TSeries { order: self.order, coeffs: self.coeffs.iter().map(|c| c.eval(nu)).collect() }
    }
}

pub const DEFAULT_ORDER_BUDGET: usize = 200;

/// Coefficients [tⁿ]z_{p,q} stored for p ≥ q.
#[derive(Clone, Debug)]
pub struct PartitionTable<R> {
    nu: R,
    zero: R,
    max_order: usize,
    budget: usize,
    /// `Some((l, n))`: only entries with p+q ≤ l + n - order are kept, enough
    /// to evaluate every z_{p,q} with p+q ≤ l exactly up to order n.
    cone: Option<(usize, usize)>,
    offsets: Vec<usize>,
    rows: Vec<Vec<R>>,
}

fn min_order(p: usize, q: usize) -> usize {
    (p + q).div_ceil(2)
}

impl PartitionTable<NuPolynomial> {
    /// Empty exact table (order 0).
    pub fn exact() -> Self {
        Self::new(NuPolynomial::nu())
    }
}

impl<R: SeriesRing> PartitionTable<R> {
    /// Empty table for the coupling `nu` (an element of the ring).
    pub fn new(nu: R) -> Self {
        PartitionTable {
            nu,
            zero: R::zero(),
            max_order: 0,
            budget: DEFAULT_ORDER_BUDGET,
            cone: None,
            offsets: vec![0, 0],
            rows: Vec::new(),
        }
    }

    /// Table restricted to what is needed for perimeters up to `perimeter`
    /// at order `order`; built immediately.
    pub fn cone(nu: R, perimeter: usize, order: usize) -> Result<Self> {
        let mut t = Self::new(nu);
        t.cone = Some((perimeter, order));
        t.extend_to(order)?;
        Ok(t)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn nu(&self) -> &R {
        &self.nu
    }

    /// Largest perimeter p+q with stored coefficients at order `n`.
    pub fn perimeter_limit(&self, n: usize) -> usize {
        match self.cone {
            None => 2 * n,
            Some((l, big_n)) => (2 * n).min((l + big_n).saturating_sub(n)),
        }
    }

    fn pairs_at(s: usize) -> usize {
        s / 2 + 1
    }

    fn ensure_perimeter(&mut self, s_max: usize) {
        while self.offsets.len() <= s_max + 1 {
            let s = self.offsets.len() - 1;
            let next = self.offsets[s] + Self::pairs_at(s);
            self.offsets.push(next);
        }
        let need = self.offsets[s_max + 1];
        let width = self.max_order + 1;
        while self.rows.len() < need {
            self.rows.push(vec![R::zero(); width]);
        }
    }

    fn index(&self, p: usize, q: usize) -> Option<usize> {
        let (a, b) = if p >= q { (p, q) } else { (q, p) };
        let s = a + b;
        if s == 0 || s + 1 >= self.offsets.len() {
            return None;
        }
        Some(self.offsets[s] + b)
    }

    /// [tⁿ]z_{p,q}; zero outside the stored range.
    pub fn get(&self, p: usize, q: usize, n: usize) -> &R {
        if n > self.max_order {
            return &self.zero;
        }
        match self.index(p, q) {
            Some(i) if i < self.rows.len() => &self.rows[i][n],
            _ => &self.zero,
        }
    }

    pub fn entry(&self, p: usize, q: usize, n: usize) -> R {
        self.get(p, q, n).clone()
    }

    /// Overwrite a stored coefficient (both orientations share storage).
    pub fn set_entry(&mut self, p: usize, q: usize, n: usize, value: R) -> Result<()> {
        match self.index(p, q) {
            Some(i) if i < self.rows.len() && n <= self.max_order => {
                self.rows[i][n] = value;
                Ok(())
            }
            _ => Err(Error::MissingTable(format!("no slot for ({p},{q},{n})"))),
        }
    }

    pub fn series(&self, p: usize, q: usize) -> TSeries<R> {
        TSeries {
            order: self.max_order,
            coeffs: (0..=self.max_order).map(|n| self.entry(p, q, n)).collect(),
        }
    }

    /// [t^m](z_a z_b) for the pairs a, b.
    fn conv(&self, acc: &mut R, a: (usize, usize), b: (usize, usize), m: usize) {
        let lo_a = min_order(a.0, a.1);
        let lo_b = min_order(b.0, b.1);
        if lo_a + lo_b > m {
            return;
        }
        for i in lo_a..=(m - lo_b) {
            acc.mul_add_assign(self.get(a.0, a.1, i), self.get(b.0, b.1, m - i));
        }
    }

    /// Right-hand side of the recursion for [tⁿ]z_{p,q} from lower orders.
    /// Works for every orientation, which lets tests check the spin-flip
    /// symmetry instead of assuming it.
    pub fn entry_by_recursion(&self, p: usize, q: usize, n: usize) -> R {
        if n == 0 || p + q == 0 {
            return R::zero();
        }
        let m = n - 1;
        let mut acc = R::zero();
        if p >= 1 && q >= 1 {
            acc.add_assign_ref(self.get(p + 1, q, m));
            acc.add_assign_ref(self.get(p, q + 1, m));
            for k in 0..p {
                self.conv(&mut acc, (p - k, q), (k + 1, 0), m);
            }
            for k in 0..q {
                self.conv(&mut acc, (p, q - k), (0, k + 1), m);
            }
            if p == 1 && q == 1 && m == 0 {
                acc.add_assign_ref(&R::one());
            }
            acc
        } else {
            let r = p.max(q);
            acc.add_assign_ref(self.get(r + 1, 0, m));
            acc.add_assign_ref(self.get(r, 1, m));
            for k in 0..r {
                self.conv(&mut acc, (r - k, 0), (k + 1, 0), m);
            }
            if r == 2 && m == 0 {
                acc.add_assign_ref(&R::one());
            }
            self.nu.mul_ref(&acc)
        }
    }

    /// Compute all coefficients up to `target` (no-op if already there).
    pub fn extend_to(&mut self, target: usize) -> Result<()> {
        if target > self.budget {
            return Err(Error::Capacity { requested: target, budget: self.budget });
        }
        if let Some((_, n)) = self.cone {
            if target > n {
                return Err(Error::Capacity { requested: target, budget: n });
            }
        }
        if target <= self.max_order {
            return Ok(());
        }
        let width = target + 1;
        for row in &mut self.rows {
            row.resize(width, R::zero());
        }
        let old = self.max_order;
        self.max_order = target;
        let s_all = (1..=target).map(|n| self.perimeter_limit(n)).max().unwrap_or(0);
        self.ensure_perimeter(s_all);
        for n in (old + 1)..=target {
            let s_max = self.perimeter_limit(n);
            let mut pairs = Vec::new();
            for s in 1..=s_max {
                for q in 0..=s / 2 {
                    pairs.push((s - q, q));
                }
            }
            let values: Vec<(usize, R)> = pairs
                .par_iter()
                .map(|&(p, q)| (self.index(p, q).unwrap(), self.entry_by_recursion(p, q, n)))
                .collect();
            for (i, v) in values {
                self.rows[i][n] = v;
            }
        }
        Ok(())
    }

    /// Stored (p, q) pairs with p ≥ q.
    pub fn stored_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 1..self.offsets.len().saturating_sub(1) {
            for q in 0..=s / 2 {
                if self.index(s - q, q).is_some_and(|i| i < self.rows.len()) {
                    out.push((s - q, q));
                }
            }
        }
        out
    }
}

/// Consuming form of [`PartitionTable::extend_to`].
pub fn extend_table<R: SeriesRing>(mut table: PartitionTable<R>, target: usize) -> Result<PartitionTable<R>> {
    table.extend_to(target)?;
    Ok(table)
}

/// Partial sum of a series with nonnegative terms and a heuristic bound on
/// the omitted tail, taken from the decay of the last computed terms.
pub fn sum_with_tail<T: Real>(coeffs: &[T], t: &T) -> (T, T) {
    let mut terms = Vec::with_capacity(coeffs.len());
    let mut pw = T::one();
    let mut sum = T::zero();
    for c in coeffs {
        let term = c.clone() * pw.clone();
        sum = sum + term.clone();
        terms.push(term);
        pw = pw * t.clone();
    }
    let nz: Vec<(usize, f64)> = terms
        .iter()
        .enumerate()
        .filter_map(|(i, x)| {
            let v = x.to_f64();
            (v > 0.0).then_some((i, v))
        })
        .collect();
    if nz.is_empty() {
        return (sum, T::zero());
    }
    let (n_last, a_last) = *nz.last().unwrap();
    if nz.len() < 3 {
        return (sum, T::from_f64(a_last));
    }
    let tail = nz.len().min(6);
    let recent = &nz[nz.len() - tail..];
    let rho = recent
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).powf(1.0 / (w[1].0 - w[0].0) as f64))
        .skip(tail.saturating_sub(4))
        .fold(0.0f64, f64::max);
    // terms may be nonzero only on a residue class (z_{p,q} lives on
    // n ≡ const mod 3), so the tail sums every d-th term
    let d = (n_last - nz[nz.len() - 2].0) as f64;
    let bound = if rho < 0.98 {
        a_last * rho.powf(d) / (1.0 - rho.powf(d))
    } else {
        // log-log slope over the recent terms
        let xs: Vec<f64> = recent.iter().map(|&(i, _)| (i.max(1) as f64).ln()).collect();
        let ys: Vec<f64> = recent.iter().map(|&(_, v)| v.ln()).collect();
        let slope = crate::scaling::least_squares(&xs, &ys).map(|f| f.slope).unwrap_or(0.0);
        let beta = -slope;
        if beta > 1.05 {
            a_last * n_last as f64 / ((beta - 1.0) * d)
        } else {
            f64::INFINITY
        }
    };
    (sum, T::from_f64(bound))
}

/// Numeric value of z_{p,q}(t, ν) from an exact table, with a tail bound.
pub fn eval_partition<T: Real>(
    p: usize,
    q: usize,
    t: &T,
    nu: &T,
    table: &PartitionTable<NuPolynomial>,
) -> Result<(T, T)> {
    if *t < T::zero() {
        return Err(Error::Domain("negative t".into()));
    }
    let tc = crate::constants::t_crit_of_nu(&nu.to_f64())?;
    if t.to_f64() > tc * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("t = {} exceeds t_c(ν) = {tc}", t.to_f64())));
    }
    if table.max_order() == 0 {
        return Err(Error::MissingTable("empty table".into()));
    }
    let coeffs: Vec<T> = table.series(p, q).coeffs.iter().map(|c| c.eval(nu)).collect();
    Ok(sum_with_tail(&coeffs, t))
}

/// Same as [`eval_partition`] for a table already specialised to a numeric ν.
pub fn eval_numeric<T: Real>(p: usize, q: usize, t: &T, table: &PartitionTable<T>) -> (T, T) {
    sum_with_tail(&table.series(p, q).coeffs, t)
}

/// Total mass of the first-step law of the finite peeling process at
/// (p, q) and subcritical t, i.e. the recursion divided by z_{p,q}, from
/// truncated numeric series. Returns the mass and a bound on the error
/// caused by truncation (zero mass error is expected up to that bound).
pub fn finite_law_mass<T: Real + SeriesRing>(table: &PartitionTable<T>, p: usize, q: usize, t: &T) -> Result<(f64, f64)> {
    if p + q == 0 {
        return Err(Error::Domain("empty boundary".into()));
    }
    let ev = |a: usize, b: usize| -> (f64, f64) {
        let (v, e) = eval_numeric(a, b, t, table);
        (v.to_f64(), e.to_f64())
    };
    let tf = t.to_f64();
    let (z, ez) = ev(p, q);
    let mut s = 0.0;
    let mut err = 0.0;
    let mut add = |(v, e): (f64, f64)| {
        s += v;
        err += e;
    };
    let prod = |(a, ea): (f64, f64), (b, eb): (f64, f64)| (a * b, ea * b + a * eb + ea * eb);
    let pre = if p >= 1 && q >= 1 {
        add(ev(p + 1, q));
        add(ev(p, q + 1));
        for k in 0..p {
            add(prod(ev(p - k, q), ev(k + 1, 0)));
        }
        for k in 0..q {
            add(prod(ev(p, q - k), ev(0, k + 1)));
        }
        if p == 1 && q == 1 {
            add((1.0, 0.0));
        }
        tf
    } else {
        let r = p.max(q);
        add(ev(r + 1, 0));
        add(ev(r, 1));
        for k in 0..r {
            add(prod(ev(r - k, 0), ev(k + 1, 0)));
        }
        if r == 2 {
            add((1.0, 0.0));
        }
        tf * table.nu().to_f64()
    };
    let mass = pre * s / z;
    Ok((mass, pre * err / z + mass * ez / z))
}

/// Outcome of the functional-equation audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub order: usize,
    /// Max |coefficient| of the bicoloured-boundary equation residual.
    pub bichromatic: f64,
    /// Max |coefficient| of the disk-amplitude equation residual.
    pub monochromatic: f64,
    pub nonzero_terms: usize,
}

impl ResidualReport {
    pub fn is_zero(&self) -> bool {
        self.nonzero_terms == 0
    }
}

/// Dense truncated series in (u, v, t).
struct Tri<R> {
    du: usize,
    dv: usize,
    dt: usize,
    c: Vec<R>,
}

impl<R: SeriesRing> Tri<R> {
    fn new(du: usize, dv: usize, dt: usize) -> Self {
        Tri { du, dv, dt, c: vec![R::zero(); (du + 1) * (dv + 1) * (dt + 1)] }
    }
    fn at(&self, p: usize, q: usize, n: usize) -> usize {
        (p * (self.dv + 1) + q) * (self.dt + 1) + n
    }
    fn get(&self, p: usize, q: usize, n: usize) -> &R {
        &self.c[self.at(p, q, n)]
    }
    fn add(&mut self, p: usize, q: usize, n: usize, x: &R) {
        if p <= self.du && q <= self.dv && n <= self.dt {
            let i = self.at(p, q, n);
            self.c[i].add_assign_ref(x);
        }
    }
    fn mul(&self, o: &Tri<R>) -> Tri<R> {
        let mut out = Tri::<R>::new(self.du, self.dv, self.dt);
        for p in 0..=self.du {
            for q in 0..=self.dv {
                for n in 0..=self.dt {
                    let a = self.get(p, q, n);
                    if a.is_zero() {
                        continue;
                    }
                    for p2 in 0..=(o.du.min(self.du - p)) {
                        for q2 in 0..=(o.dv.min(self.dv - q)) {
                            for n2 in 0..=(o.dt.min(self.dt - n)) {
                                let b = o.get(p2, q2, n2);
                                if b.is_zero() {
                                    continue;
                                }
                                let i = out.at(p + p2, q + q2, n + n2);
                                out.c[i].mul_add_assign(a, b);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Assemble Z(u,v), Z₀(u), Z₁ from the table and report the residuals of
///
///   Z = t[(Z − uZ₁(v) + Z·Z₀(u))/u + (Z − vZ₁(u) + Z·Z₀(v))/v + uv]
///   Z₀ = tν[(Z₀ − u z_{1,0})/u + Z₀²/u + Z₁(u) + u²]
///
/// coefficientwise up to t-order `order`.
pub fn check_master_equation<R: SeriesRing>(table: &PartitionTable<R>, order: usize) -> Result<ResidualReport> {
    if table.max_order() < order {
        return Err(Error::MissingTable(format!("table order {} < {order}", table.max_order())));
    }
    if order == 0 {
        return Ok(ResidualReport { order, bichromatic: 0.0, monochromatic: 0.0, nonzero_terms: 0 });
    }
    // multiplying by u and v shifts degrees by one, so carry one spare degree
    let d = 2 * order + 2;
    let dt = order;
    let mut z = Tri::<R>::new(d, d, dt);
    let mut z0u = Tri::<R>::new(d, 0, dt);
    let mut z0v = Tri::<R>::new(0, d, dt);
    let mut z1u = Tri::<R>::new(d, 0, dt);
    let mut z1v = Tri::<R>::new(0, d, dt);
    for n in 0..=dt {
        for p in 1..=d {
            let w = table.get(p, 0, n);
            z0u.add(p, 0, n, w);
            z0v.add(0, p, n, w);
            let w1 = table.get(p, 1, n);
            z1u.add(p, 0, n, w1);
            z1v.add(0, p, n, w1);
            for q in 1..=d {
                z.add(p, q, n, table.get(p, q, n));
            }
        }
    }
    let z_z0u = z.mul(&z0u);
    let z_z0v = z.mul(&z0v);
    let z0_sq = z0u.mul(&z0u);
    let mut nonzero = 0usize;
    let mut worst_b = 0.0f64;
    let mut worst_m = 0.0f64;
    let one = R::one();
    // bichromatic equation: coefficient of u^p v^q t^n, p,q ≥ 1
    for n in 1..=dt {
        for p in 1..d {
            for q in 1..d {
                if p + q > 2 * n {
                    continue;
                }
                let m = n - 1;
                let mut rhs = R::zero();
                // (Z − uZ₁(v))/u and (Z·Z₀(u))/u
                if p < d {
                    rhs.add_assign_ref(z.get(p + 1, q, m));
                    rhs.add_assign_ref(z_z0u.get(p + 1, q, m));
                }
                if q < d {
                    rhs.add_assign_ref(z.get(p, q + 1, m));
                    rhs.add_assign_ref(z_z0v.get(p, q + 1, m));
                }
                if p == 1 && q == 1 && m == 0 {
                    rhs.add_assign_ref(&one);
                }
                let mut res = z.get(p, q, n).clone();
                res.sub_assign_ref(&rhs);
                if !res.is_zero() {
                    nonzero += 1;
                    worst_b = worst_b.max(res.magnitude());
                }
            }
        }
    }
    // monochromatic equation: coefficient of u^p t^n, p ≥ 1
    let nu = table.nu();
    for n in 1..=dt {
        for p in 1..d {
            if p > 2 * n {
                continue;
            }
            let m = n - 1;
            let mut inner = R::zero();
            inner.add_assign_ref(z0u.get(p + 1, 0, m));
            inner.add_assign_ref(z0_sq.get(p + 1, 0, m));
            inner.add_assign_ref(z1u.get(p, 0, m));
            if p == 2 && m == 0 {
                inner.add_assign_ref(&one);
            }
            let rhs = nu.mul_ref(&inner);
            let mut res = z0u.get(p, 0, n).clone();
            res.sub_assign_ref(&rhs);
            if !res.is_zero() {
                nonzero += 1;
                worst_m = worst_m.max(res.magnitude());
            }
        }
    }
    // the v-side disk series must mirror the u-side one
    for n in 0..=dt {
        for p in 1..=d {
            let mut diff = z0u.get(p, 0, n).clone();
            diff.sub_assign_ref(z0v.get(0, p, n));
            let mut diff1 = z1u.get(p, 0, n).clone();
            diff1.sub_assign_ref(z1v.get(0, p, n));
            if !diff.is_zero() || !diff1.is_zero() {
                nonzero += 1;
            }
        }
    }
    Ok(ResidualReport { order, bichromatic: worst_b, monochromatic: worst_m, nonzero_terms: nonzero })
}

/// Versioned on-disk form of an exact table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableFile {
    pub version: u32,
    pub max_order: usize,
    /// (p, q, n, [(numerator, denominator)]) with index = power of ν.
    pub entries: Vec<(usize, usize, usize, Vec<(String, String)>)>,
}

pub const TABLE_FILE_VERSION: u32 = 1;

impl TableFile {
    pub fn from_table(table: &PartitionTable<NuPolynomial>) -> Self {
        let mut entries = Vec::new();
        for (p, q) in table.stored_pairs() {
            for n in 0..=table.max_order() {
                let c = table.get(p, q, n);
                if !Zero::is_zero(c) {
                    let fr = c.coeffs().iter().map(|x| (x.to_string(), "1".to_string())).collect();
                    entries.push((p, q, n, fr));
                }
            }
        }
        TableFile { version: TABLE_FILE_VERSION, max_order: table.max_order(), entries }
    }

    /// Rebuild the stored entries; non-integral fractions are rejected.
    pub fn entries_exact(&self) -> Result<Vec<((usize, usize, usize), NuPolynomial)>> {
        if self.version != TABLE_FILE_VERSION {
            return Err(Error::Format(format!("unsupported table version {}", self.version)));
        }
        let mut out = Vec::with_capacity(self.entries.len());
        for (p, q, n, fr) in &self.entries {
            let mut cs = Vec::with_capacity(fr.len());
            for (num, den) in fr {
                let num: BigInt = num.parse().map_err(|_| Error::Format(format!("bad numerator {num}")))?;
                let den: BigInt = den.parse().map_err(|_| Error::Format(format!("bad denominator {den}")))?;
                if den.is_zero() || !(num.clone() % den.clone()).is_zero() {
                    return Err(Error::Format(format!("non-integral coefficient {num}/{den}")));
                }
                cs.push(num / den);
            }
            out.push(((*p, *q, *n), NuPolynomial::from_coeffs(cs)));
        }
        Ok(out)
    }
}

/// Compare a stored table file against a fresh computation; returns the
/// list of mismatching (p, q, n).
pub fn verify_table_file(file: &TableFile, order: usize) -> Result<Vec<(usize, usize, usize)>> {
    let order = order.min(file.max_order);
    let mut fresh = PartitionTable::exact();
    fresh.extend_to(order)?;
    let stored = file.entries_exact()?;
    let mut bad = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for ((p, q, n), poly) in stored {
        if n > order {
            continue;
        }
        seen.insert((p, q, n));
        if fresh.get(p, q, n) != &poly {
            bad.push((p, q, n));
        }
    }
    for (p, q) in fresh.stored_pairs() {
        for n in 0..=order {
            if !Zero::is_zero(fresh.get(p, q, n)) && !seen.contains(&(p, q, n)) {
                bad.push((p, q, n));
            }
        }
    }
    Ok(bad)
}
