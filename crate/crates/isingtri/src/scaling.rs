//! Empirical laws, reference limit laws, fits and experiments.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{c_infinity, mu};
use crate::error::{Error, Result};
use crate::peeling::{
    drift_estimate, hull_run, increments, run_many, run_rng, BoundaryState, Event, PeelingLaw, PeelingTrace, Regime, RunConfig,
    Stop,
};

/// Ordinary least squares y ≈ intercept + slope·x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub n: usize,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::InsufficientData(format!("{n} points")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("degenerate abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, slope_stderr, n })
}

/// Log-log least squares of `values[k]` against k for k in [lo, hi].
pub fn fit_tail_exponent(values: &[f64], lo: usize, hi: usize) -> Result<LinearFit> {
    if lo == 0 || hi >= values.len() || hi <= lo {
        return Err(Error::InsufficientData(format!("range [{lo}, {hi}] of {}", values.len())));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=hi)
        .filter(|&k| values[k] > 0.0)
        .map(|k| ((k as f64).ln(), values[k].ln()))
        .unzip();
    least_squares(&xs, &ys)
}

/// Sorted sample; +∞ marks a censored observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_nan()) {
            return Err(Error::InsufficientData("empty or NaN sample".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        Ok(EmpiricalCdf { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn censored(&self) -> usize {
        self.values.iter().filter(|v| v.is_infinite()).count()
    }

    /// Fraction of the sample ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// sup_x |F_n(x) − F(x)| for a continuous F.
    pub fn ks(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.len() as f64;
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < self.values.len() {
            let x = self.values[i];
            if x.is_infinite() {
                break;
            }
            let mut j = i;
            while j < self.values.len() && self.values[j] == x {
                j += 1;
            }
            let fx = f(x);
            worst = worst.max((fx - i as f64 / n).abs()).max((j as f64 / n - fx).abs());
            i = j;
        }
        // censored mass: F_n stays at i/n while F → 1
        worst.max(1.0 - i as f64 / n)
    }

    /// Two-sample sup distance.
    pub fn ks_two_sample(&self, other: &EmpiricalCdf) -> f64 {
        let mut xs: Vec<f64> = self.values.iter().chain(&other.values).copied().filter(|v| v.is_finite()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        xs.dedup();
        xs.iter().map(|&x| (self.eval(x) - other.eval(x)).abs()).fold(0.0, f64::max)
    }

    /// Up to `max_points` (x, F_n(x)) pairs at evenly spaced ranks.
    pub fn points(&self, max_points: usize) -> Vec<(f64, f64)> {
        let n = self.len();
        let stride = n.div_ceil(max_points.max(1)).max(1);
        (0..n)
            .step_by(stride)
            .chain((!(n - 1).is_multiple_of(stride)).then_some(n - 1))
            .filter(|&i| self.values[i].is_finite())
            .map(|i| (self.values[i], (i + 1) as f64 / n as f64))
            .collect()
    }

    /// log-log fit of the empirical survival P(S > x) over log-spaced x in [lo, hi].
    pub fn survival_exponent(&self, lo: f64, hi: f64, points: usize) -> Result<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..points)
            .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
            .map(|x| (x, 1.0 - self.eval(x)))
            .filter(|&(_, s)| s > 0.0)
            .map(|(x, s)| (x.ln(), s.ln()))
            .unzip();
        least_squares(&xs, &ys)
    }
}

/// 1 − (1+μt)^{−4/3}.
pub fn reference_law_halfplane(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 + mu::<f64>() * t).powf(-4.0 / 3.0)
}

/// 1 − (1+μt)^{−11/3}.
pub fn reference_law_diagonal_closed(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 + mu::<f64>() * t).powf(-11.0 / 3.0)
}

/// 1 − exp(−∫₀ᵗ c_∞((λ+μs)/(1+μs)) ds/(1+μs)). With v = log(1+μs) the
/// exponent is μ⁻¹∫₀^{log(1+μt)} c_∞(1 + (λ−1)e^{−v}) dv.
pub fn reference_law_diagonal(t: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("λ = {lambda}")));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let m = mu::<f64>();
    let vmax = (m * t).ln_1p();
    let err = std::cell::Cell::new(None);
    let g = |v: f64| match c_infinity(1.0 + (lambda - 1.0) * (-v).exp()) {
        Ok(c) => c,
        Err(e) => {
            err.set(Some(e));
            0.0
        }
    };
    let out = quadrature::integrate(g, 0.0, vmax, 1e-13);
    if let Some(e) = err.take() {
        return Err(e);
    }
    if !(out.error_estimate <= 1e-11 * out.integral.abs().max(1.0)) {
        return Err(Error::Quadrature(format!("error estimate {}", out.error_estimate)));
    }
    Ok(1.0 - (-out.integral / m).exp())
}

/// Bracketing curves off the exact-ratio diagonal: the law with c_∞
/// replaced by its min (lower) and max (upper) over [λ_min, λ_max].
pub fn bracketing_laws(t: f64, lambda_min: f64, lambda_max: f64) -> Result<(f64, f64)> {
    let grid: Vec<f64> =
        (0..=64).map(|i| lambda_min * (lambda_max / lambda_min).powf(i as f64 / 64.0)).collect();
    let cs: Vec<f64> = grid.iter().map(|&l| c_infinity(l)).collect::<Result<_>>()?;
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    let v = (mu::<f64>() * t.max(0.0)).ln_1p() / mu::<f64>();
    Ok((1.0 - (-lo * v).exp(), 1.0 - (-hi * v).exp()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub nu: f64,
    pub p: usize,
    pub q: Option<usize>,
    pub lambda: Option<f64>,
    pub m: Option<usize>,
    pub runs: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub experiment: String,
    pub params: ExperimentParams,
    pub table_hash: String,
    pub exponent: Option<f64>,
    pub exponent_stderr: Option<f64>,
    pub ks: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub censored: u64,
    /// Further named numbers (means, standard errors, expected values).
    pub extra: BTreeMap<String, f64>,
    pub cdf: Vec<(f64, f64)>,
}

impl ScalingReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("x,F\n");
        for (x, f) in &self.cdf {
            s.push_str(&format!("{x},{f}\n"));
        }
        s
    }
}

const CDF_POINTS: usize = 512;

fn reference_for(regime: Regime, p: usize, q: usize) -> Result<Box<dyn Fn(f64) -> f64>> {
    match regime {
        Regime::HalfPlane => Ok(Box::new(reference_law_halfplane)),
        Regime::Finite if p == q => Ok(Box::new(reference_law_diagonal_closed)),
        Regime::Finite => {
            let lambda = q as f64 / p as f64;
            Ok(Box::new(move |t| reference_law_diagonal(t, lambda).unwrap_or(f64::NAN)))
        }
        _ => Err(Error::Domain(format!("no reference law for {regime:?}"))),
    }
}

/// Empirical law of T_m/p against the limit law, one report per m.
#[allow(clippy::too_many_arguments)]
pub fn hitting_time_experiment(
    law: &PeelingLaw,
    regime: Regime,
    p: usize,
    q: usize,
    ms: &[usize],
    runs: u64,
    seed: u64,
    max_steps: u64,
    tolerance: f64,
) -> Result<Vec<ScalingReport>> {
    let mut cfg = RunConfig::new(regime, p, q, Stop::Hitting(ms.to_vec()));
    cfg.max_steps = max_steps;
    let traces = run_many(law, &cfg, seed, runs)?;
    let reference = reference_for(regime, p, q)?;
    ms.iter()
        .map(|&m| {
            let sample: Vec<f64> =
                traces.iter().map(|t| t.hitting.get(&m).map_or(f64::INFINITY, |&n| n as f64 / p as f64)).collect();
            let cdf = EmpiricalCdf::new(sample)?;
            let ks = cdf.ks(&reference);
            Ok(ScalingReport {
                experiment: "hitting".into(),
                params: ExperimentParams {
                    nu: law.tables.nu,
                    p,
                    q: (regime == Regime::Finite).then_some(q),
                    lambda: (regime == Regime::Finite).then_some(q as f64 / p as f64),
                    m: Some(m),
                    runs,
                    seed,
                },
                table_hash: law.tables.config.hash(),
                exponent: None,
                exponent_stderr: None,
                ks: Some(ks),
                tolerance,
                pass: ks <= tolerance,
                censored: cdf.censored() as u64,
                extra: BTreeMap::new(),
                cdf: cdf.points(CDF_POINTS),
            })
        })
        .collect()
}

/// Empirical law of η/p against the same limit laws.
pub fn interface_experiment(
    law: &PeelingLaw,
    regime: Regime,
    p: usize,
    q: usize,
    runs: u64,
    seed: u64,
    max_steps: u64,
    tolerance: f64,
) -> Result<(ScalingReport, Vec<PeelingTrace>)> {
    let stop = match regime {
        Regime::HalfPlane => Stop::Hitting(vec![0]),
        _ => Stop::End,
    };
    let mut cfg = RunConfig::new(regime, p, q, stop);
    cfg.max_steps = max_steps;
    cfg.interface = true;
    let traces = run_many(law, &cfg, seed, runs)?;
    let sample: Vec<f64> = traces.iter().map(|t| t.eta.map_or(f64::INFINITY, |e| e as f64 / p as f64)).collect();
    let cdf = EmpiricalCdf::new(sample)?;
    let ks = cdf.ks(reference_for(regime, p, q)?);
    let mut extra = BTreeMap::new();
    let finite: Vec<f64> = cdf.values().iter().copied().filter(|v| v.is_finite()).collect();
    extra.insert("mean_eta_over_p".into(), finite.iter().sum::<f64>() / finite.len().max(1) as f64);
    let jumps = traces.iter().filter(|t| t.jump_censored).count();
    extra.insert("censored_jumps".into(), jumps as f64);
    let report = ScalingReport {
        experiment: "interface".into(),
        params: ExperimentParams {
            nu: law.tables.nu,
            p,
            q: (regime == Regime::Finite).then_some(q),
            lambda: (regime == Regime::Finite).then_some(q as f64 / p as f64),
            m: None,
            runs,
            seed,
        },
        table_hash: law.tables.config.hash(),
        exponent: None,
        exponent_stderr: None,
        ks: Some(ks),
        tolerance,
        pass: ks <= tolerance,
        censored: cdf.censored() as u64,
        extra,
        cdf: cdf.points(CDF_POINTS),
    };
    Ok((report, traces))
}

/// KS distance between the laws of (X_n − c·n)/n^a at n1 and n2 under ℙ_∞.
#[allow(clippy::too_many_arguments)]
pub fn stable_selfsimilarity_test(
    law: &PeelingLaw,
    n1: u64,
    n2: u64,
    runs: u64,
    exponent: f64,
    centering: f64,
    seed: u64,
    tolerance: f64,
) -> Result<ScalingReport> {
    let pairs: Vec<(i64, i64)> = (0..runs)
        .into_par_iter()
        .map(|s| -> Result<(i64, i64)> {
            let mut rng = run_rng(seed, s);
            let state = BoundaryState::fullplane();
            let (mut x, mut x1) = (0i64, 0i64);
            for n in 1..=n2 {
                x += increments(state, law.sample(state, &mut rng)?.event)?.0;
                if n == n1 {
                    x1 = x;
                }
            }
            Ok((x1, x))
        })
        .collect::<Result<_>>()?;
    let scale = |x: i64, n: u64| (x as f64 - centering * n as f64) / (n as f64).powf(exponent);
    let a = EmpiricalCdf::new(pairs.iter().map(|&(x, _)| scale(x, n1)).collect())?;
    let b = EmpiricalCdf::new(pairs.iter().map(|&(_, x)| scale(x, n2)).collect())?;
    let ks = a.ks_two_sample(&b);
    let mut extra = BTreeMap::new();
    extra.insert("n1".into(), n1 as f64);
    extra.insert("n2".into(), n2 as f64);
    extra.insert("centering".into(), centering);
    Ok(ScalingReport {
        experiment: "stable".into(),
        params: ExperimentParams { nu: law.tables.nu, runs, seed, ..Default::default() },
        table_hash: law.tables.config.hash(),
        exponent: Some(exponent),
        exponent_stderr: None,
        ks: Some(ks),
        tolerance,
        pass: ks <= tolerance,
        censored: 0,
        extra,
        cdf: b.points(CDF_POINTS),
    })
}

/// Tail exponent of |∂H| under ℙ_∞, fitted over [lo, hi]. Censored runs
/// count as +∞.
#[allow(clippy::too_many_arguments)]
pub fn hull_experiment(
    law: &PeelingLaw,
    runs: u64,
    seed: u64,
    max_steps: u64,
    lo: f64,
    hi: f64,
    target: f64,
    tolerance: f64,
) -> Result<ScalingReport> {
    let out: Vec<Option<(u64, u64)>> =
        (0..runs).into_par_iter().map(|s| hull_run(law, seed, s, max_steps)).collect::<Result<_>>()?;
    let cdf = EmpiricalCdf::new(out.iter().map(|o| o.map_or(f64::INFINITY, |(_, h)| h as f64)).collect())?;
    let fit = cdf.survival_exponent(lo, hi, 24)?;
    let mut extra = BTreeMap::new();
    extra.insert("censored_fraction".into(), cdf.censored() as f64 / runs as f64);
    extra.insert("survival_at_hi".into(), 1.0 - cdf.eval(hi));
    Ok(ScalingReport {
        experiment: "hull".into(),
        params: ExperimentParams { nu: law.tables.nu, runs, seed, ..Default::default() },
        table_hash: law.tables.config.hash(),
        exponent: Some(fit.slope),
        exponent_stderr: Some(fit.slope_stderr),
        ks: None,
        tolerance,
        pass: (fit.slope - target).abs() <= tolerance,
        censored: cdf.censored() as u64,
        extra,
        cdf: cdf.points(CDF_POINTS),
    })
}

/// Monte Carlo E_∞(X₁) against `expected`, within `sigmas` standard errors.
pub fn drift_experiment(law: &PeelingLaw, draws: u64, seed: u64, expected: f64, sigmas: f64) -> Result<ScalingReport> {
    let d = drift_estimate(law, draws, seed)?;
    let mut extra = BTreeMap::new();
    extra.insert("mean".into(), d.mean);
    extra.insert("stderr".into(), d.stderr);
    extra.insert("trimmed_mean".into(), d.trimmed_mean);
    extra.insert("trimmed_stderr".into(), d.trimmed_stderr);
    extra.insert("expected".into(), expected);
    extra.insert("swallowed_mean".into(), d.swallowed_mean);
    extra.insert("swallowed_stderr".into(), d.swallowed_stderr);
    Ok(ScalingReport {
        experiment: "drift".into(),
        params: ExperimentParams { nu: law.tables.nu, runs: draws, seed, ..Default::default() },
        table_hash: law.tables.config.hash(),
        exponent: None,
        exponent_stderr: None,
        ks: None,
        tolerance: sigmas,
        pass: (d.mean - expected).abs() <= sigmas * d.stderr,
        censored: 0,
        extra,
        cdf: Vec::new(),
    })
}

fn event_class(e: Event) -> usize {
    match e {
        Event::CPlus => 0,
        Event::CMinus => 1,
        Event::End => 2,
        Event::R(k) => 2 + k.min(4),
        Event::L(k) => 6 + k.min(4),
    }
}

const CLASSES: usize = 11;

/// Pearson χ² of the lag-1 contingency table of event classes.
fn lag_chi2(cls: &[usize]) -> f64 {
    let mut t = [[0.0f64; CLASSES]; CLASSES];
    for w in cls.windows(2) {
        t[w[0]][w[1]] += 1.0;
    }
    let n = (cls.len() - 1) as f64;
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..CLASSES).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut chi = 0.0;
    for i in 0..CLASSES {
        for j in 0..CLASSES {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                chi += (t[i][j] - e).powi(2) / e;
            }
        }
    }
    chi
}

/// Permutation test of independence for the ℙ_∞ event sequence: the run
/// is cut into `blocks` disjoint blocks of `block_len` steps, and for each
/// block the lag-1 χ² is compared with `permutations` shuffles of the
/// same block. Passes when no block has p-value below `level`.
pub fn independence_test(
    law: &PeelingLaw,
    blocks: usize,
    block_len: usize,
    permutations: usize,
    seed: u64,
    level: f64,
) -> Result<ScalingReport> {
    use rand::seq::SliceRandom;
    let n = (blocks * block_len) as u64;
    let mut cfg = RunConfig::new(Regime::FullPlane, 0, 0, Stop::Steps(n));
    cfg.max_steps = n;
    cfg.record = true;
    let tr = crate::peeling::run(law, &cfg, seed, 0)?;
    if tr.events.len() < blocks * block_len {
        return Err(Error::Domain(format!("run stopped after {} steps", tr.events.len())));
    }
    let pvals: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut cls: Vec<usize> =
                tr.events[b * block_len..(b + 1) * block_len].iter().map(|&e| event_class(e)).collect();
            let obs = lag_chi2(&cls);
            let mut rng = run_rng(seed, 1 + b as u64);
            let mut ge = 0usize;
            for _ in 0..permutations {
                cls.shuffle(&mut rng);
                if lag_chi2(&cls) >= obs {
                    ge += 1;
                }
            }
            (ge + 1) as f64 / (permutations + 1) as f64
        })
        .collect();
    let min_p = pvals.iter().cloned().fold(1.0, f64::min);
    let mut extra = BTreeMap::new();
    for (b, p) in pvals.iter().enumerate() {
        extra.insert(format!("p_value_{b}"), *p);
    }
    extra.insert("min_p_value".into(), min_p);
    Ok(ScalingReport {
        experiment: "independence".into(),
        params: ExperimentParams { nu: law.tables.nu, runs: blocks as u64, seed, m: Some(block_len), ..Default::default() },
        table_hash: law.tables.config.hash(),
        exponent: None,
        exponent_stderr: None,
        ks: None,
        tolerance: level,
        pass: min_p >= level,
        censored: 0,
        extra,
        cdf: Vec::new(),
    })
}
