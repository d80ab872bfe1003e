//! Peeling along the Ising interface: event alphabet, the one-step laws
//! under ℙ_{p,q}, ℙ_p, ℙ_0 and ℙ_∞, perimeter bookkeeping and runs.
//!
//! Boundary conventions. The peel edge joins the end of the + segment to
//! the start of the − segment. `R(k)` puts the third vertex k edges back
//! along the + side (swallowing k edges, k = 0 meaning a loop at the +
//! endpoint), `L(k)` k edges forward along the − side. Under the targeted
//! finite law the chain stays in P, Q ≥ 1 and stops with `End` at (1,1).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientTables;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Event {
    CPlus,
    CMinus,
    L(usize),
    R(usize),
    End,
}

impl Event {
    pub fn swallowed(&self) -> usize {
        match self {
            Event::L(k) | Event::R(k) => *k,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Boltzmann triangulation of the (p,q)-gon, peeled towards ρ†.
    Finite,
    /// Finite + segment of length p in an infinite − boundary.
    HalfPlane,
    /// Infinite monochromatic boundary: the half-plane law at p = 0.
    Mono,
    FullPlane,
}

/// Perimeters of the unexplored region; `None` is an infinite segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub done: bool,
}

impl BoundaryState {
    pub fn finite(p: usize, q: usize) -> Self {
        BoundaryState { p: Some(p), q: Some(q), done: false }
    }

    pub fn halfplane(p: usize) -> Self {
        BoundaryState { p: Some(p), q: None, done: false }
    }

    pub fn fullplane() -> Self {
        BoundaryState { p: None, q: None, done: false }
    }

    pub fn initial(regime: Regime, p: usize, q: usize) -> Result<Self> {
        match regime {
            Regime::Finite if p + q == 0 => Err(Error::Domain("empty boundary".into())),
            Regime::Finite => Ok(Self::finite(p, q)),
            Regime::HalfPlane if p == 0 => Err(Error::Domain("half-plane law needs p ≥ 1".into())),
            Regime::HalfPlane => Ok(Self::halfplane(p)),
            Regime::Mono => Ok(Self::halfplane(0)),
            Regime::FullPlane => Ok(Self::fullplane()),
        }
    }

    /// P_n ∧ Q_n, with ∞ as `usize::MAX`.
    pub fn min_perimeter(&self) -> usize {
        self.p.unwrap_or(usize::MAX).min(self.q.unwrap_or(usize::MAX))
    }
}

fn inconsistent(event: Event, state: BoundaryState) -> Error {
    Error::InconsistentEvent { event: format!("{event:?}"), state: format!("{state:?}") }
}

/// Finite-law events written in their other form (R_{p+k} ≡ L_{q−k−1},
/// L_{q+k} ≡ R_{p−k−1}) are mapped to the short form.
pub fn canonicalize(state: BoundaryState, event: Event) -> Event {
    match (state.p, state.q, event) {
        (Some(p), Some(q), Event::R(k)) if p >= 1 && q >= 1 && k >= p && k - p < q => Event::L(q - (k - p) - 1),
        (Some(p), Some(q), Event::L(k)) if p >= 1 && q >= 1 && k >= q && k - q < p => Event::R(p - (k - q) - 1),
        _ => event,
    }
}

/// (X₁, Y₁) of `event` from `state`. Under the finite targeted law the
/// swallowed part never contains ρ†; on a monochromatic finite boundary
/// the split loses k edges of that colour.
pub fn increments(state: BoundaryState, event: Event) -> Result<(i64, i64)> {
    let event = canonicalize(state, event);
    let err = || inconsistent(event, state);
    if state.done {
        return Err(err());
    }
    let ki = |k: usize| k as i64;
    Ok(match (state.p, state.q, event) {
        (_, _, Event::CPlus) => (1, 0),
        (_, _, Event::CMinus) => (0, 1),
        (Some(1), Some(1), Event::End) | (Some(2), Some(0), Event::End) | (Some(0), Some(2), Event::End) => (0, 0),
        (_, _, Event::End) => return Err(err()),
        // finite, two colours
        (Some(p), Some(q), Event::L(k)) if p >= 1 && q >= 1 => {
            if k >= q {
                return Err(err());
            }
            (0, -ki(k))
        }
        (Some(p), Some(q), Event::R(k)) if p >= 1 && q >= 1 => {
            if k >= p {
                return Err(err());
            }
            (-ki(k), 0)
        }
        // finite monochromatic
        (Some(p), Some(0), Event::R(k)) if k < p => (-ki(k), 0),
        (Some(0), Some(q), Event::L(k)) if k < q => (0, -ki(k)),
        (Some(_), Some(_), _) => return Err(err()),
        // ℙ_0: both swallows eat the infinite boundary
        (Some(0), None, Event::L(k) | Event::R(k)) => (0, -ki(k)),
        // ℙ_p
        (Some(_), None, Event::L(k)) => (0, -ki(k)),
        (Some(p), None, Event::R(k)) if k < p => (-ki(k), 0),
        (Some(p), None, Event::R(k)) => (-ki(p), -ki(k - p)),
        // ℙ_∞
        (None, _, Event::L(k)) => (0, -ki(k)),
        (None, _, Event::R(k)) => (-ki(k), 0),
    })
}

/// The state after `event`.
pub fn step(state: BoundaryState, event: Event) -> Result<BoundaryState> {
    let (dx, dy) = increments(state, event)?;
    let shift = |v: Option<usize>, d: i64| v.map(|x| (x as i64 + d) as usize);
    let mut next = BoundaryState { p: shift(state.p, dx), q: shift(state.q, dy), done: false };
    if matches!(canonicalize(state, event), Event::End) {
        next = BoundaryState { p: Some(0), q: Some(0), done: true };
    }
    Ok(next)
}

/// Law of j ≥ 1 with P(j) ∝ w_j: alias table up to k_cut, then the exact
/// residual mass spread by inverse transform on the leading power law.
#[derive(Clone, Debug)]
pub struct SwallowSampler {
    alias: WeightedAliasIndex<f64>,
    k_cut: usize,
    head: f64,
    tail: f64,
    exponent: f64,
}

impl SwallowSampler {
    pub fn new(tables: &CoefficientTables) -> Result<Self> {
        let k_cut = tables.config.k_cut;
        let weights = tables.w[1..=k_cut].to_vec();
        let alias = WeightedAliasIndex::new(weights).map_err(|e| Error::Domain(format!("alias table: {e}")))?;
        let head = tables.w_partial();
        let tail = tables.w_tail_exact();
        if tail <= 0.0 {
            return Err(Error::Precision(format!("negative tail mass {tail}")));
        }
        Ok(SwallowSampler { alias, k_cut, head, tail, exponent: tables.w_tail.exponents[0] })
    }

    /// Σ_j w_j.
    pub fn total(&self) -> f64 {
        self.head + self.tail
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if rng.random::<f64>() * self.total() < self.head {
            self.alias.sample(rng) + 1
        } else {
            let u: f64 = 1.0 - rng.random::<f64>();
            let x = (self.k_cut as f64 + 0.5) * u.powf(-1.0 / (self.exponent - 1.0));
            (x.round() as usize).max(self.k_cut + 1)
        }
    }
}

/// A sampled event, plus whether a half-plane jump size had to be cut at
/// the edge of the ζ table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draw {
    pub event: Event,
    pub censored: bool,
}

impl From<Event> for Draw {
    fn from(event: Event) -> Self {
        Draw { event, censored: false }
    }
}

/// One-step laws built on a set of coefficient tables.
#[derive(Clone, Debug)]
pub struct PeelingLaw<'a> {
    pub tables: &'a CoefficientTables,
    pub swallow: SwallowSampler,
}

impl<'a> PeelingLaw<'a> {
    pub fn new(tables: &'a CoefficientTables) -> Result<Self> {
        Ok(PeelingLaw { tables, swallow: SwallowSampler::new(tables)? })
    }

    fn r(&self) -> f64 {
        self.tables.ratio()
    }

    fn zeta(&self, p: usize, q: usize) -> Result<f64> {
        self.tables.zeta_at(p, q).ok_or_else(|| Error::MissingTable(format!("ζ_{{{p},{q}}}")))
    }

    fn alpha(&self, p: usize) -> Result<f64> {
        self.tables.alpha_at(p).ok_or_else(|| Error::MissingTable(format!("a_{p}")))
    }

    fn need_critical(&self) -> Result<()> {
        if self.tables.critical {
            Ok(())
        } else {
            Err(Error::MissingTable("this law needs the ν_c tables".into()))
        }
    }

    /// P(event | state) under the law of `regime`.
    pub fn probability(&self, state: BoundaryState, event: Event) -> Result<f64> {
        let r = self.r();
        let nu = self.tables.nu;
        let w = |k: usize| self.tables.w_at(k);
        let event = canonicalize(state, event);
        Ok(match (state.p, state.q) {
            (None, _) => match event {
                Event::CPlus | Event::CMinus => r,
                Event::L(k) | Event::R(k) => r * w(k + 1),
                Event::End => 0.0,
            },
            (Some(0), None) => {
                self.need_critical()?;
                match event {
                    Event::CPlus => r * nu * self.alpha(1)? / self.alpha(0)?,
                    Event::CMinus => r * nu,
                    Event::L(k) | Event::R(k) => r * nu * w(k + 1),
                    Event::End => 0.0,
                }
            }
            (Some(p), None) => {
                self.need_critical()?;
                let ap = self.alpha(p)?;
                match event {
                    Event::CPlus => r * self.alpha(p + 1)? / ap,
                    Event::CMinus => r,
                    Event::L(k) => r * w(k + 1),
                    Event::R(k) if k < p => r * self.alpha(p - k)? * w(k + 1) / ap,
                    Event::R(k) => r * self.alpha(0)? * self.zeta(p, k - p + 1)? / ap,
                    Event::End => 0.0,
                }
            }
            (Some(p), Some(q)) => self.finite_probability(p, q, event)?,
        })
    }

    fn finite_probability(&self, p: usize, q: usize, event: Event) -> Result<f64> {
        let t = self.tables;
        let (r, nu, u) = (self.r(), t.nu, t.u_c);
        let w = |k: usize| t.w_at(k);
        if p >= 1 && q >= 1 {
            let z = self.zeta(p, q)?;
            return Ok(match event {
                Event::CPlus => r * self.zeta(p + 1, q)? / z,
                Event::CMinus => r * self.zeta(p, q + 1)? / z,
                Event::L(k) if k < q => r * self.zeta(p, q - k)? * w(k + 1) / z,
                Event::R(k) if k < p => r * self.zeta(p - k, q)? * w(k + 1) / z,
                Event::End if p == 1 && q == 1 => t.t_c * u * u / z,
                _ => 0.0,
            });
        }
        // monochromatic, colour of the non-zero side
        let (m, same, opp, split) = if q == 0 {
            (p, Event::CPlus, Event::CMinus, matches!(event, Event::R(_)))
        } else {
            (q, Event::CMinus, Event::CPlus, matches!(event, Event::L(_)))
        };
        let wm = w(m);
        Ok(if event == same {
            r * nu * w(m + 1) / wm
        } else if event == opp {
            r * nu * self.zeta(m, 1)? / wm
        } else if event == Event::End {
            if m == 2 {
                t.t_c * nu * u * u / wm
            } else {
                0.0
            }
        } else if split && event.swallowed() < m {
            let k = event.swallowed();
            r * nu * w(m - k) * w(k + 1) / wm
        } else {
            0.0
        })
    }

    /// Every event of the finite law at (p, q) with its probability.
    pub fn finite_events(&self, p: usize, q: usize) -> Result<Vec<(Event, f64)>> {
        let state = BoundaryState::finite(p, q);
        let mut evs = vec![Event::CPlus, Event::CMinus, Event::End];
        evs.extend((0..q).map(Event::L));
        evs.extend((0..p).map(Event::R));
        let mut out = Vec::with_capacity(evs.len());
        for e in evs {
            let pr = self.probability(state, e)?;
            if pr > 0.0 {
                out.push((e, pr));
            }
        }
        Ok(out)
    }

    /// Total mass of the law at `state` (ℙ_p and ℙ_∞ use the closed-form
    /// class totals).
    pub fn total_mass(&self, state: BoundaryState) -> Result<f64> {
        match (state.p, state.q) {
            (None, _) => Ok(self.tables.normalization_infinite()),
            (Some(0), None) => self.tables.normalization_mono(),
            (Some(p), None) => self.tables.normalization_halfplane(p),
            (Some(p), Some(q)) => Ok(self.finite_events(p, q)?.iter().map(|(_, v)| v).sum()),
        }
    }

    /// Draw the next event.
    pub fn sample<R: Rng + ?Sized>(&self, state: BoundaryState, rng: &mut R) -> Result<Draw> {
        if state.done {
            return Err(Error::Domain("the process has ended".into()));
        }
        let r = self.r();
        match (state.p, state.q) {
            (None, _) => {
                let u: f64 = rng.random();
                Ok(if u < r {
                    Event::CPlus
                } else if u < 2.0 * r {
                    Event::CMinus
                } else {
                    let k = self.swallow.sample(rng) - 1;
                    if rng.random::<bool>() {
                        Event::L(k)
                    } else {
                        Event::R(k)
                    }
                }
                .into())
            }
            (Some(0), None) => {
                self.need_critical()?;
                let nu = self.tables.nu;
                let u: f64 = rng.random();
                let c1 = r * nu * self.alpha(1)? / self.alpha(0)?;
                Ok(if u < c1 {
                    Event::CPlus
                } else if u < c1 + r * nu {
                    Event::CMinus
                } else {
                    let k = self.swallow.sample(rng) - 1;
                    if rng.random::<bool>() {
                        Event::L(k)
                    } else {
                        Event::R(k)
                    }
                }
                .into())
            }
            (Some(p), None) => self.sample_halfplane(p, rng),
            (Some(p), Some(q)) => Ok(self.sample_finite(p, q, rng)?.into()),
        }
    }

    fn sample_halfplane<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<Draw> {
        self.need_critical()?;
        let t = self.tables;
        let r = self.r();
        let ap = self.alpha(p)?;
        let mut u: f64 = rng.random();
        let c_plus = r * self.alpha(p + 1)? / ap;
        if u < c_plus {
            return Ok(Event::CPlus.into());
        }
        u -= c_plus;
        if u < r {
            return Ok(Event::CMinus.into());
        }
        u -= r;
        let c_left = r * self.swallow.total();
        if u < c_left {
            return Ok(Event::L(self.swallow.sample(rng) - 1).into());
        }
        u -= c_left;
        let row = *t.row_sums.get(p).ok_or_else(|| Error::MissingTable(format!("row sum at {p}")))?;
        let c_jump = r * self.alpha(0)? * row / ap;
        if u < c_jump {
            // jump over ρ†: k' with weight ζ_{p,k'+1}
            let mut v = rng.random::<f64>() * row;
            let mut k = 0;
            while let Some(z) = t.zeta_at(p, k + 1) {
                if v < z {
                    return Ok(Event::R(p + k).into());
                }
                v -= z;
                k += 1;
            }
            return Ok(Draw { event: Event::R(p + k), censored: true });
        }
        u -= c_jump;
        let scale = r / ap;
        for k in 0..p {
            let c = scale * self.alpha(p - k)? * t.w[k + 1];
            if u < c {
                return Ok(Event::R(k).into());
            }
            u -= c;
        }
        Ok(Event::R(p - 1).into())
    }

    /// Scan C⁺, C⁻, End, then L_k and R_k alternately by increasing k.
    /// Should the weights fall short of the uniform draw (they sum to 1 up
    /// to table accuracy), the draw is repeated below the computed total.
    fn sample_finite<R: Rng + ?Sized>(&self, p: usize, q: usize, rng: &mut R) -> Result<Event> {
        let state = BoundaryState::finite(p, q);
        let mut u: f64 = rng.random();
        loop {
            let mut acc = 0.0;
            let mut consider = |e: Event| -> Result<bool> {
                acc += self.probability(state, e)?;
                Ok(u < acc)
            };
            for e in [Event::CPlus, Event::CMinus, Event::End] {
                if consider(e)? {
                    return Ok(e);
                }
            }
            for k in 0..p.max(q) {
                if k < q && consider(Event::L(k))? {
                    return Ok(Event::L(k));
                }
                if k < p && consider(Event::R(k))? {
                    return Ok(Event::R(k));
                }
            }
            if !(acc > 0.0) {
                return Err(Error::Precision(format!("no mass at ({p},{q})")));
            }
            u = rng.random::<f64>() * acc;
        }
    }
}

/// Per-run RNG: stream `stream` of the ChaCha8 generator seeded by `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stop {
    /// Until T_m for the smallest listed m; all listed hitting times are recorded.
    Hitting(Vec<usize>),
    /// Until the finite process ends.
    End,
    Steps(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Hit,
    End,
    Steps,
    Budget,
    /// A needed table entry was outside the stored range.
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub regime: Regime,
    pub p: usize,
    pub q: usize,
    pub stop: Stop,
    pub max_steps: u64,
    /// Keep the event list and the (X, Y) paths.
    pub record: bool,
    pub interface: bool,
}

impl RunConfig {
    pub fn new(regime: Regime, p: usize, q: usize, stop: Stop) -> Self {
        RunConfig { regime, p, q, stop, max_steps: 10_000_000, record: false, interface: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeelingTrace {
    pub seed: u64,
    pub stream: u64,
    pub regime: Option<Regime>,
    pub p: usize,
    pub q: usize,
    pub nu: f64,
    pub events: Vec<Event>,
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    /// m ↦ T_m for the requested m that were reached.
    pub hitting: BTreeMap<usize, u64>,
    pub eta: Option<u64>,
    pub steps: u64,
    pub final_x: i64,
    pub final_y: i64,
    pub final_state: Option<BoundaryState>,
    pub stop: Option<StopReason>,
    /// State before the jump that ended a half-plane run, with its k'.
    pub jump: Option<(usize, usize)>,
    pub jump_censored: bool,
}

/// One peeling run.
pub fn run(law: &PeelingLaw, cfg: &RunConfig, seed: u64, stream: u64) -> Result<PeelingTrace> {
    let mut rng = run_rng(seed, stream);
    let mut state = BoundaryState::initial(cfg.regime, cfg.p, cfg.q)?;
    let mut tr = PeelingTrace {
        seed,
        stream,
        regime: Some(cfg.regime),
        p: cfg.p,
        q: cfg.q,
        nu: law.tables.nu,
        ..Default::default()
    };
    if cfg.record {
        tr.x.push(0);
        tr.y.push(0);
    }
    let ms: Vec<usize> = match &cfg.stop {
        Stop::Hitting(ms) => ms.clone(),
        _ => Vec::new(),
    };
    let m_min = ms.iter().copied().min();
    let mut reason = StopReason::Budget;
    let note_hits = |state: &BoundaryState, n: u64, hitting: &mut BTreeMap<usize, u64>| {
        let s = state.min_perimeter();
        for &m in &ms {
            if s <= m {
                hitting.entry(m).or_insert(n);
            }
        }
    };
    note_hits(&state, 0, &mut tr.hitting);
    while tr.steps < cfg.max_steps {
        if let Some(m) = m_min {
            if tr.hitting.contains_key(&m) {
                reason = StopReason::Hit;
                break;
            }
        }
        if matches!(cfg.stop, Stop::Steps(s) if tr.steps >= s) {
            reason = StopReason::Steps;
            break;
        }
        if state.done {
            reason = StopReason::End;
            break;
        }
        let draw = match law.sample(state, &mut rng) {
            Ok(d) => d,
            Err(Error::MissingTable(_)) => {
                reason = StopReason::Table;
                break;
            }
            Err(e) => return Err(e),
        };
        let (dx, dy) = increments(state, draw.event)?;
        if let (Some(p), None, Event::R(k)) = (state.p, state.q, draw.event) {
            if p > 0 && k >= p {
                tr.jump = Some((p, k - p));
                tr.jump_censored = draw.censored;
            }
        }
        state = step(state, draw.event)?;
        tr.steps += 1;
        tr.final_x += dx;
        tr.final_y += dy;
        if cfg.record {
            tr.events.push(draw.event);
            tr.x.push(tr.final_x);
            tr.y.push(tr.final_y);
        }
        note_hits(&state, tr.steps, &mut tr.hitting);
    }
    if state.done && reason == StopReason::Budget {
        reason = StopReason::End;
    }
    tr.final_state = Some(state);
    tr.stop = Some(reason);
    if cfg.interface {
        tr.eta = interface_length(law, &tr, &mut rng)?;
    }
    Ok(tr)
}

/// Runs `0..runs` on streams of `seed`, in parallel, ordered by stream.
pub fn run_many(law: &PeelingLaw, cfg: &RunConfig, seed: u64, runs: u64) -> Result<Vec<PeelingTrace>> {
    (0..runs).into_par_iter().map(|s| run(law, cfg, seed, s)).collect()
}

/// Steps of the targeted finite chain from (p, q) up to and including End;
/// `None` when it leaves the tables or exceeds `budget`.
pub fn finite_interface<R: Rng + ?Sized>(law: &PeelingLaw, p: usize, q: usize, budget: u64, rng: &mut R) -> Result<Option<u64>> {
    let mut state = BoundaryState::finite(p, q);
    let mut n = 0;
    while !state.done {
        if n >= budget {
            return Ok(None);
        }
        let e = match law.sample(state, rng) {
            Ok(d) => d.event,
            Err(Error::MissingTable(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        state = step(state, e)?;
        n += 1;
    }
    Ok(Some(n))
}

/// Interface length η of a run. Finite runs stopped at End give their step
/// count. Half-plane runs stopped by the jump over ρ† continue inside the
/// finite (P, k'+1) region cut off by the jump: η = T_0 + η_{P,k'+1}.
/// `None` if the run was censored.
pub fn interface_length<R: Rng + ?Sized>(law: &PeelingLaw, tr: &PeelingTrace, rng: &mut R) -> Result<Option<u64>> {
    match tr.regime {
        Some(Regime::Finite) => Ok((tr.stop == Some(StopReason::End)).then_some(tr.steps)),
        Some(Regime::HalfPlane) => {
            let Some((p, k)) = tr.jump else { return Ok(None) };
            if tr.jump_censored {
                return Ok(None);
            }
            let rest = finite_interface(law, p, k + 1, 1_000_000_000, rng)?;
            Ok(rest.map(|r| tr.steps + r))
        }
        _ => Err(Error::Domain("η is defined for finite and half-plane runs".into())),
    }
}

/// Hull run under ℙ_∞: peel until the first R_k reaching the original +
/// boundary. Returns (steps, |∂H|) or `None` when `max_steps` ran out.
/// A counts explored + frontier edges, B explored − frontier edges.
pub fn hull_run(law: &PeelingLaw, seed: u64, stream: u64, max_steps: u64) -> Result<Option<(u64, u64)>> {
    let mut rng = run_rng(seed, stream);
    let state = BoundaryState::fullplane();
    let (mut a, mut b) = (0usize, 0usize);
    for n in 1..=max_steps {
        match law.sample(state, &mut rng)?.event {
            Event::CPlus => a += 1,
            Event::CMinus => b += 1,
            Event::R(k) if k >= a => return Ok(Some((n, b as u64 + 2))),
            Event::R(k) => a -= k,
            Event::L(k) => b = b.saturating_sub(k),
            Event::End => unreachable!("no End under the full-plane law"),
        }
    }
    Ok(None)
}

/// Sample mean and naive standard error of X₁ (or of the swallowed count)
/// over `draws` full-plane steps; also the mean with the largest 0.01%
/// absolute values trimmed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub draws: u64,
    pub mean: f64,
    pub stderr: f64,
    pub trimmed_mean: f64,
    pub trimmed_stderr: f64,
    pub swallowed_mean: f64,
    pub swallowed_stderr: f64,
}

pub fn drift_estimate(law: &PeelingLaw, draws: u64, seed: u64) -> Result<DriftEstimate> {
    const CHUNKS: u64 = 64;
    let per = draws.div_ceil(CHUNKS);
    let parts: Vec<(Vec<i64>, f64, f64)> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| -> Result<(Vec<i64>, f64, f64)> {
            let mut rng = run_rng(seed, c);
            let n = per.min(draws.saturating_sub(c * per));
            let mut xs = Vec::with_capacity(n as usize);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let e = law.sample(BoundaryState::fullplane(), &mut rng)?.event;
                let (dx, _) = increments(BoundaryState::fullplane(), e)?;
                xs.push(dx);
                let k = e.swallowed() as f64;
                s1 += k;
                s2 += k * k;
            }
            Ok((xs, s1, s2))
        })
        .collect::<Result<_>>()?;
    let mut xs: Vec<i64> = Vec::with_capacity(draws as usize);
    let (mut s1, mut s2) = (0.0, 0.0);
    for (x, a, b) in parts {
        xs.extend(x);
        s1 += a;
        s2 += b;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = xs.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mut sorted: Vec<i64> = xs.clone();
    sorted.sort_unstable_by_key(|v| v.abs());
    let keep = sorted.len() - sorted.len() / 10_000;
    let trimmed_mean = sorted[..keep].iter().map(|&v| v as f64).sum::<f64>() / keep as f64;
    let tvar = sorted[..keep].iter().map(|&v| (v as f64 - trimmed_mean).powi(2)).sum::<f64>() / (keep as f64 - 1.0);
    let sm = s1 / n;
    let svar = (s2 / n - sm * sm) * n / (n - 1.0);
    Ok(DriftEstimate {
        draws: xs.len() as u64,
        mean,
        stderr: (var / n).sqrt(),
        trimmed_mean,
        trimmed_stderr: (tvar / keep as f64).sqrt(),
        swallowed_mean: sm,
        swallowed_stderr: (svar / n).sqrt(),
    })
}

/// JSON-lines summary record of a run.
pub fn summary_json(tr: &PeelingTrace) -> serde_json::Value {
    serde_json::json!({
        "seed": tr.seed,
        "stream": tr.stream,
        "regime": tr.regime,
        "p": tr.p,
        "q": tr.q,
        "nu": tr.nu,
        "T": tr.hitting,
        "eta": tr.eta,
        "steps": tr.steps,
        "final_state": tr.final_state,
        "stop": tr.stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::TableConfig;
    use crate::constants::nu_c;
    use std::sync::OnceLock;

    fn tables() -> &'static CoefficientTables {
        static T: OnceLock<CoefficientTables> = OnceLock::new();
        T.get_or_init(|| CoefficientTables::build(&TableConfig::small(nu_c::<f64>(), true)).unwrap())
    }

    #[test]
    fn increments_full_alphabet() {
        let s = BoundaryState::finite(5, 4);
        assert_eq!(step(s, Event::CPlus).unwrap(), BoundaryState::finite(6, 4));
        assert_eq!(step(s, Event::CMinus).unwrap(), BoundaryState::finite(5, 5));
        assert_eq!(step(s, Event::R(0)).unwrap(), s);
        assert_eq!(increments(s, Event::L(3)).unwrap(), (0, -3));
        assert_eq!(increments(s, Event::R(4)).unwrap(), (-4, 0));
        // R_{p+k} ≡ L_{q−k−1}
        assert_eq!(increments(s, Event::R(6)).unwrap(), (0, -2));
        assert_eq!(increments(s, Event::L(4)).unwrap(), (-4, 0));
        assert!(increments(s, Event::End).is_err());
        assert!(step(BoundaryState::finite(1, 1), Event::End).unwrap().done);
        assert_eq!(increments(BoundaryState::fullplane(), Event::L(3)).unwrap(), (0, -3));
        assert_eq!(increments(BoundaryState::fullplane(), Event::R(3)).unwrap(), (-3, 0));
        assert_eq!(increments(BoundaryState::halfplane(0), Event::R(3)).unwrap(), (0, -3));
        assert_eq!(increments(BoundaryState::halfplane(0), Event::L(3)).unwrap(), (0, -3));
        assert_eq!(increments(BoundaryState::halfplane(4), Event::R(6)).unwrap(), (-4, -2));
        assert_eq!(increments(BoundaryState::finite(3, 0), Event::R(2)).unwrap(), (-2, 0));
        assert!(increments(BoundaryState::finite(3, 0), Event::L(0)).is_err());
    }

    #[test]
    fn finite_laws_normalised() {
        let law = PeelingLaw::new(tables()).unwrap();
        for (p, q) in [(1, 1), (5, 4), (2, 0), (0, 3), (1, 0), (30, 2), (100, 100)] {
            let s = law.total_mass(BoundaryState::finite(p, q)).unwrap();
            assert!((s - 1.0).abs() < 1e-8, "({p},{q}): {s}");
        }
        let end = law.probability(BoundaryState::finite(1, 1), Event::End).unwrap();
        assert!((end - tables().t_c * tables().u_c.powi(2) / tables().zeta_at(1, 1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn infinite_law_symmetric() {
        let law = PeelingLaw::new(tables()).unwrap();
        let s = BoundaryState::fullplane();
        for k in [0, 1, 10, 1000, 100_000] {
            assert_eq!(law.probability(s, Event::L(k)).unwrap(), law.probability(s, Event::R(k)).unwrap());
        }
        assert!((law.probability(s, Event::CPlus).unwrap() - 0.3428648565).abs() < 1e-9);
    }

    #[test]
    fn markov_transitions_from_5_4() {
        let law = PeelingLaw::new(tables()).unwrap();
        let s = BoundaryState::finite(5, 4);
        let mut rng = run_rng(7, 0);
        let n = 200_000;
        let mut counts: BTreeMap<Event, u64> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(law.sample(s, &mut rng).unwrap().event).or_default() += 1;
        }
        for (e, p) in law.finite_events(5, 4).unwrap() {
            let f = *counts.get(&e).unwrap_or(&0) as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 5.0 * sd + 1e-6, "{e:?}: {f} vs {p}");
        }
    }

    #[test]
    fn swallow_sampler_tail_frequency() {
        let law = PeelingLaw::new(tables()).unwrap();
        let mut rng = run_rng(3, 1);
        let n = 2_000_000;
        let hits = (0..n).filter(|_| law.swallow.sample(&mut rng) > tables().config.k_cut).count();
        let expect = law.swallow.tail_mass() * n as f64;
        assert!((hits as f64 - expect).abs() < 5.0 * expect.sqrt() + 1.0, "{hits} vs {expect}");
    }

    #[test]
    fn runs_reproducible() {
        let law = PeelingLaw::new(tables()).unwrap();
        let mut cfg = RunConfig::new(Regime::HalfPlane, 20, 0, Stop::Hitting(vec![0, 5]));
        cfg.record = true;
        cfg.max_steps = 1_000_000;
        let a = run(&law, &cfg, 11, 3).unwrap();
        let b = run(&law, &cfg, 11, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.hitting[&5] <= a.hitting.get(&0).copied().unwrap_or(u64::MAX));
        assert!(a.events.iter().all(|e| *e != Event::End));
    }

    #[test]
    fn edge_map_interface() {
        let law = PeelingLaw::new(tables()).unwrap();
        let mut rng = run_rng(1, 0);
        let mut seen_one = false;
        for _ in 0..2000 {
            let eta = finite_interface(&law, 1, 1, 1_000_000, &mut rng).unwrap().unwrap();
            assert!(eta >= 1);
            seen_one |= eta == 1;
        }
        assert!(seen_one);
    }
}
