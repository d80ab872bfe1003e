//! Explicit construction of explored maps from peeling events.
//!
//! The builder keeps every unexplored region as a cycle of boundary
//! half-edges: each has its own face on the left and the region on its
//! right, with `opp` unset until a triangle is glued from inside. Infinite
//! boundaries are materialised lazily: a region may own one *far*
//! half-edge standing for everything beyond the vertices created so far,
//! and walking into it subdivides it.
//!
//! Geometry of one step on the peel edge e = (a → b), with third vertex c:
//! the triangle is x = (b → a), y = (a → c), z = (c → b), and e is replaced
//! on the boundary by y, z. R_k takes c = tail of the k-th boundary edge
//! before e and closes the swallowed hole [g_k … g_1, y]; L_k takes c =
//! head of the k-th edge after e and closes [f_1 … f_k, z]. Whatever the
//! event, the next targeted peel edge is z after C⁺ and R, y after C⁻ and L.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hemap::BicoloredMap;
use crate::peeling::{run_rng, step, BoundaryState, Event, PeelingLaw, PeelingTrace, Regime};

const NONE: usize = usize::MAX;

/// Default cap on the number of half-edges of one construction.
pub const DEFAULT_HALF_EDGE_BUDGET: usize = 4_000_000;

/// Where a triangle was created.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Boundary,
    Ribbon,
    Left,
    Right,
    Hole,
}

/// Geometric form of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Geo {
    New(i8),
    Back(usize),
    Forward(usize),
    Close,
}

fn geo(event: Event, tau: i8) -> Geo {
    match event {
        Event::CPlus => Geo::New(tau),
        Event::CMinus => Geo::New(-tau),
        Event::R(k) => Geo::Back(k),
        Event::L(k) => Geo::Forward(k),
        Event::End => Geo::Close,
    }
}

struct Applied {
    y: usize,
    z: usize,
    hole: Option<usize>,
}

impl Applied {
    fn next_peel(&self, event: Event) -> usize {
        match event {
            Event::CPlus | Event::R(_) => self.z,
            _ => self.y,
        }
    }
}

#[derive(Clone, Debug)]
struct Builder {
    opp: Vec<usize>,
    next: Vec<usize>,
    vert: Vec<usize>,
    origin: Vec<Origin>,
    spin: Vec<i8>,
    bnext: Vec<usize>,
    bprev: Vec<usize>,
    /// far half-edge ↦ spins of new vertices at its (tail, head) end
    far: HashMap<usize, (i8, i8)>,
    /// edges that only close the construction and carry no distance
    virtual_edges: HashSet<usize>,
    budget: usize,
    tag: Origin,
    /// When set, swallowed holes are queued here instead of being filled.
    deferred: Option<Vec<usize>>,
}

impl Builder {
    /// A polygon whose vertices, read along the outer face, have `spins`.
    /// Half-edge i runs from vertex i to vertex i+1 and is a boundary
    /// half-edge of the single unexplored region.
    fn polygon(spins: &[i8], budget: usize) -> Result<Self> {
        let m = spins.len();
        if 2 * m > budget {
            return Err(Error::Capacity { requested: 2 * m, budget });
        }
        let b = Builder {
            opp: vec![NONE; m],
            next: (0..m).map(|i| (i + 1) % m).collect(),
            vert: (0..m).collect(),
            origin: vec![Origin::Boundary; m],
            spin: spins.to_vec(),
            bnext: (0..m).map(|i| (i + 1) % m).collect(),
            bprev: (0..m).map(|i| (i + m - 1) % m).collect(),
            far: HashMap::new(),
            virtual_edges: HashSet::new(),
            budget,
            tag: Origin::Ribbon,
            deferred: None,
        };
        Ok(b)
    }

    fn len(&self) -> usize {
        self.opp.len()
    }

    fn head(&self, h: usize) -> usize {
        self.vert[self.next[h]]
    }

    fn new_vertex(&mut self, s: i8) -> usize {
        self.spin.push(s);
        self.spin.len() - 1
    }

    fn new_half_edge(&mut self, tail: usize) -> Result<usize> {
        if self.len() >= self.budget {
            return Err(Error::Capacity { requested: self.len() + 1, budget: self.budget });
        }
        self.opp.push(NONE);
        self.next.push(NONE);
        self.vert.push(tail);
        self.origin.push(self.tag);
        self.bnext.push(NONE);
        self.bprev.push(NONE);
        Ok(self.len() - 1)
    }

    fn link(&mut self, a: usize, b: usize) {
        self.bnext[a] = b;
        self.bprev[b] = a;
    }

    /// Subdivide the far half-edge f by a new vertex; the new half-edge g
    /// follows f on its face and on its region cycle. With `toward_head`
    /// the new vertex sits next to the old head and f stays far,
    /// otherwise it sits next to the tail and g becomes the far one.
    fn subdivide(&mut self, f: usize, toward_head: bool) -> Result<usize> {
        let (ts, hs) = self.far[&f];
        let w = self.new_vertex(if toward_head { hs } else { ts });
        let g = self.new_half_edge(w)?;
        self.origin[g] = self.origin[f];
        self.next[g] = self.next[f];
        self.next[f] = g;
        let n = self.bnext[f];
        self.link(g, n);
        self.link(f, g);
        if !toward_head {
            self.far.remove(&f);
            self.far.insert(g, (ts, hs));
        }
        Ok(g)
    }

    /// The k boundary half-edges preceding e, in cycle order (g_k … g_1).
    fn back(&mut self, e: usize, k: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(k);
        let mut cur = e;
        for _ in 0..k {
            let mut p = self.bprev[cur];
            if self.far.contains_key(&p) {
                p = self.subdivide(p, true)?;
            }
            if p == e {
                return Err(Error::Domain("swallow wraps around the region".into()));
            }
            out.push(p);
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    /// The k boundary half-edges following e (f_1 … f_k).
    fn forward(&mut self, e: usize, k: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(k);
        let mut cur = e;
        for _ in 0..k {
            let n = self.bnext[cur];
            if self.far.contains_key(&n) {
                self.subdivide(n, false)?;
            }
            if n == e {
                return Err(Error::Domain("swallow wraps around the region".into()));
            }
            out.push(n);
            cur = n;
        }
        Ok(out)
    }

    fn glue_triangle(&mut self, e: usize, c: usize) -> Result<(usize, usize)> {
        let a = self.vert[e];
        let b = self.head(e);
        let x = self.new_half_edge(b)?;
        let y = self.new_half_edge(a)?;
        let z = self.new_half_edge(c)?;
        self.next[x] = y;
        self.next[y] = z;
        self.next[z] = x;
        self.opp[x] = e;
        self.opp[e] = x;
        Ok((y, z))
    }

    fn apply(&mut self, e: usize, g: Geo) -> Result<Option<Applied>> {
        if self.opp[e] != NONE || self.far.contains_key(&e) {
            return Err(Error::Domain(format!("half-edge {e} is not a peelable boundary edge")));
        }
        match g {
            Geo::New(s) => {
                let (p, n) = (self.bprev[e], self.bnext[e]);
                let c = self.new_vertex(s);
                let (y, z) = self.glue_triangle(e, c)?;
                if p == e {
                    self.link(y, z);
                    self.link(z, y);
                } else {
                    self.link(p, y);
                    self.link(y, z);
                    self.link(z, n);
                }
                Ok(Some(Applied { y, z, hole: None }))
            }
            Geo::Back(k) => {
                let gs = self.back(e, k)?;
                let c = gs.first().map_or(self.vert[e], |&g| self.vert[g]);
                let p = gs.first().map_or(self.bprev[e], |&g| self.bprev[g]);
                let n = self.bnext[e];
                let (y, z) = self.glue_triangle(e, c)?;
                if p == e {
                    self.link(z, z);
                } else {
                    self.link(p, z);
                    self.link(z, n);
                }
                match (gs.first(), gs.last()) {
                    (Some(&gk), Some(&g1)) => {
                        self.link(g1, y);
                        self.link(y, gk);
                    }
                    _ => self.link(y, y),
                }
                Ok(Some(Applied { y, z, hole: Some(y) }))
            }
            Geo::Forward(k) => {
                let fs = self.forward(e, k)?;
                let c = fs.last().map_or(self.head(e), |&f| self.head(f));
                let n = fs.last().map_or(self.bnext[e], |&f| self.bnext[f]);
                let p = self.bprev[e];
                let (y, z) = self.glue_triangle(e, c)?;
                if n == e {
                    self.link(y, y);
                } else {
                    self.link(p, y);
                    self.link(y, n);
                }
                match (fs.first(), fs.last()) {
                    (Some(&f1), Some(&fk)) => {
                        self.link(fk, z);
                        self.link(z, f1);
                    }
                    _ => self.link(z, z),
                }
                Ok(Some(Applied { y, z, hole: Some(z) }))
            }
            Geo::Close => {
                let f = self.bnext[e];
                if self.bnext[f] != e || f == e {
                    return Err(Error::Domain("End needs a region of perimeter 2".into()));
                }
                if self.far.contains_key(&f) || self.head(e) != self.vert[f] || self.head(f) != self.vert[e] {
                    return Err(Error::Domain("End on a malformed 2-gon".into()));
                }
                self.opp[e] = f;
                self.opp[f] = e;
                Ok(None)
            }
        }
    }

    fn cycle(&self, h: usize) -> Vec<usize> {
        let mut out = vec![h];
        let mut g = self.bnext[h];
        while g != h {
            out.push(g);
            g = self.bnext[g];
        }
        out
    }

    /// Peel edge and finite state of a closed region: the + → − half-edge of
    /// a two-coloured cycle, or `h` itself on a monochromatic one.
    fn classify(&self, h: usize) -> Result<(usize, BoundaryState)> {
        let cyc = self.cycle(h);
        if cyc.iter().any(|g| self.far.contains_key(g)) {
            return Err(Error::Domain("cannot fill an infinite region".into()));
        }
        let s: Vec<i8> = cyc.iter().map(|&g| self.spin[self.vert[g]]).collect();
        let plus = s.iter().filter(|&&x| x == 1).count();
        let m = cyc.len();
        if plus == m {
            return Ok((h, BoundaryState::finite(m, 0)));
        }
        if plus == 0 {
            return Ok((h, BoundaryState::finite(0, m)));
        }
        let ups: Vec<usize> = (0..m).filter(|&i| s[i] == 1 && s[(i + 1) % m] == -1).collect();
        if ups.len() != 1 {
            return Err(Error::Domain(format!("hole boundary has {} + → − junctions", ups.len())));
        }
        Ok((cyc[ups[0]], BoundaryState::finite(plus, m - plus)))
    }

    /// Fill the finite region through `h` with a Boltzmann map, together
    /// with every region swallowed on the way. Returns the number of steps
    /// spent on the region of `h` itself.
    fn fill<R: Rng + ?Sized>(&mut self, law: &PeelingLaw, h: usize, rng: &mut R) -> Result<u64> {
        let saved = self.tag;
        let mut stack = vec![h];
        let mut first = None;
        while let Some(h) = stack.pop() {
            let (mut e, mut state) = self.classify(h)?;
            let mut n = 0;
            while !state.done {
                let ev = law.sample(state, rng)?.event;
                if let Some(out) = self.apply(e, geo(ev, 1))? {
                    match self.deferred.as_mut() {
                        Some(d) => d.extend(out.hole),
                        None => stack.extend(out.hole),
                    }
                    e = out.next_peel(ev);
                }
                state = step(state, ev)?;
                n += 1;
            }
            first.get_or_insert(n);
            // every region after the first lies in a swallowed hole
            self.tag = Origin::Hole;
        }
        self.tag = saved;
        Ok(first.unwrap_or(0))
    }

    /// Peel once at `e` and fill the swallowed hole, if any.
    fn peel<R: Rng + ?Sized>(
        &mut self,
        law: &PeelingLaw,
        e: usize,
        ev: Event,
        tau: i8,
        rng: &mut R,
    ) -> Result<(Option<usize>, u64)> {
        let Some(out) = self.apply(e, geo(ev, tau))? else { return Ok((None, 0)) };
        let mut filled = 0;
        if let Some(d) = self.deferred.as_mut() {
            d.extend(out.hole);
        } else if let Some(hole) = out.hole {
            let saved = self.tag;
            self.tag = Origin::Hole;
            filled = self.fill(law, hole, rng)?;
            self.tag = saved;
        }
        Ok((Some(out.next_peel(ev)), filled))
    }

    /// Fill deferred holes having a vertex within `radius` of `root`, until
    /// none is left. Holes further away cannot change distances up to
    /// `radius`.
    fn resolve<R: Rng + ?Sized>(&mut self, law: &PeelingLaw, root: usize, radius: usize, rng: &mut R) -> Result<()> {
        loop {
            let dist = self.distances(root);
            let pending = self.deferred.as_ref().map_or(&[][..], |d| &d[..]);
            let near = pending.iter().position(|&h| self.cycle(h).iter().any(|&g| dist[self.vert[g]] <= radius));
            let Some(i) = near else { return Ok(()) };
            let h = self.deferred.as_mut().expect("deferred holes").swap_remove(i);
            let saved = self.tag;
            self.tag = Origin::Hole;
            self.fill(law, h, rng)?;
            self.tag = saved;
        }
    }

    /// Close every remaining region into a single face and hand over to
    /// [`BicoloredMap`]. Returns the map and one half-edge per closed face.
    fn finish(mut self, root: usize) -> Result<(BicoloredMap, Vec<usize>, Vec<Origin>)> {
        let n0 = self.len();
        let mut seen = vec![false; n0];
        let mut holes = Vec::new();
        for h in 0..n0 {
            if self.opp[h] != NONE || seen[h] {
                continue;
            }
            let cyc = self.cycle(h);
            let twins: Vec<usize> = cyc
                .iter()
                .map(|&g| {
                    seen[g] = true;
                    let t = self.opp.len();
                    self.opp.push(g);
                    self.next.push(NONE);
                    self.vert.push(self.head(g));
                    self.origin.push(Origin::Hole);
                    t
                })
                .collect();
            let m = cyc.len();
            for i in 0..m {
                self.opp[cyc[i]] = twins[i];
                self.next[twins[i]] = twins[(i + m - 1) % m];
            }
            holes.push(twins[0]);
        }
        let mut map = BicoloredMap::from_permutations(self.opp.clone(), self.next.clone(), root);
        // the rotation orbits must be exactly the vertices created here
        let mut label = vec![NONE; map.spin.len()];
        for h in 0..map.opp.len() {
            let v = map.vert[h];
            if label[v] == NONE {
                label[v] = self.vert[h];
            } else if label[v] != self.vert[h] {
                return Err(Error::Domain("vertex identification is inconsistent".into()));
            }
        }
        let mut used = HashSet::new();
        if !label.iter().all(|&l| used.insert(l)) {
            return Err(Error::Domain("one vertex split over several rotation orbits".into()));
        }
        map.spin = label.iter().map(|&l| self.spin[l]).collect();
        Ok((map, holes, self.origin))
    }

    /// Distances from vertex `s` over real edges.
    fn distances(&self, s: usize) -> Vec<usize> {
        let nv = self.spin.len();
        let mut adj = vec![Vec::new(); nv];
        for h in 0..self.len() {
            if self.next[h] == NONE || self.far.contains_key(&h) || self.virtual_edges.contains(&h) {
                continue;
            }
            let (a, b) = (self.vert[h], self.head(h));
            adj[a].push(b);
            adj[b].push(a);
        }
        bfs(&adj, s)
    }
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                q.push_back(w);
            }
        }
    }
    dist
}

/// Reconstructed explored map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExploredMap {
    pub map: BicoloredMap,
    /// ρ: the outer half-edge on which the peeling started.
    pub rho: usize,
    /// ρ†: the outer half-edge closing the interface, for finite and
    /// half-plane boundaries.
    pub rho_dagger: Option<usize>,
    /// One half-edge in each face left unexplored.
    pub holes: Vec<usize>,
    pub origin: Vec<Origin>,
    pub steps: u64,
    /// Steps of the finite chain inside the region cut off by a half-plane
    /// jump over ρ†.
    pub jump_fill_steps: Option<u64>,
}

fn initial_spins(regime: Regime, p: usize, q: usize) -> Result<(Vec<i8>, usize, Option<(usize, i8, i8)>, Option<usize>)> {
    // (spins along the outer face, ρ, far half-edge with its end spins, ρ†)
    Ok(match regime {
        Regime::Finite => {
            if p + q == 0 {
                return Err(Error::Domain("empty boundary".into()));
            }
            let mut s = vec![1i8; p];
            s.extend(std::iter::repeat_n(-1i8, q));
            let rho = if p > 0 { p - 1 } else { q - 1 };
            let dagger = (p > 0 && q > 0).then_some(p + q - 1);
            (s, rho, None, dagger)
        }
        Regime::HalfPlane => {
            if p == 0 {
                return Err(Error::Domain("half-plane boundary needs p ≥ 1".into()));
            }
            // far, −, +^p, −
            let mut s = vec![-1i8, -1];
            s.extend(std::iter::repeat_n(1i8, p));
            s.push(-1);
            let m = s.len();
            (s, p + 1, Some((m - 1, -1, -1)), Some(1))
        }
        Regime::Mono => (vec![-1, -1, -1], 1, Some((2, -1, -1)), None),
        Regime::FullPlane => (vec![1, 1, -1, -1], 1, Some((3, -1, 1)), None),
    })
}

/// Rebuild the explored map of a recorded run: ρ sits on the outer face,
/// every swallowed hole is filled with an independent Boltzmann map, and
/// the unexplored region (if any) is left as one face.
pub fn build_explored_map(law: &PeelingLaw, trace: &PeelingTrace, seed: u64, budget: usize) -> Result<ExploredMap> {
    let regime = trace.regime.ok_or_else(|| Error::Format("trace without regime".into()))?;
    if trace.events.len() as u64 != trace.steps {
        return Err(Error::Format("trace was recorded without its events".into()));
    }
    let (spins, rho, far, dagger) = initial_spins(regime, trace.p, trace.q)?;
    let mut b = Builder::polygon(&spins, budget)?;
    if let Some((f, ts, hs)) = far {
        b.far.insert(f, (ts, hs));
        b.virtual_edges.insert(f);
    }
    let mut rng = run_rng(seed, trace.stream);
    let mut state = BoundaryState::initial(regime, trace.p, trace.q)?;
    let mut e = rho;
    let mut jump_fill_steps = None;
    for &ev in &trace.events {
        let (nx, filled) = b.peel(law, e, ev, 1, &mut rng)?;
        if let (Some(p), None, Event::R(k)) = (state.p, state.q, ev) {
            if p > 0 && k >= p {
                jump_fill_steps = Some(filled);
            }
        }
        state = step(state, ev)?;
        if let Some(nx) = nx {
            e = nx;
        }
    }
    let root = if regime == Regime::Finite { 0 } else { rho };
    let (map, holes, origin) = b.finish(root)?;
    Ok(ExploredMap { map, rho, rho_dagger: dagger, holes, origin, steps: trace.steps, jump_fill_steps })
}

/// Path of the interface through the triangles of a map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfacePath {
    /// Triangles crossed, as the half-edge by which each was entered.
    pub entries: Vec<usize>,
    /// Half-edge of the first non-triangular face reached.
    pub exit: usize,
    /// The exit face is the outer face.
    pub closed: bool,
}

/// Follow the interface from the outer half-edge `start` (a + → − edge):
/// enter the triangle across it, leave by its other bichromatic edge, and
/// repeat until a face that is not a triangle is reached.
pub fn trace_interface(map: &BicoloredMap, start: usize, holes: &[usize]) -> Result<InterfacePath> {
    let n = map.opp.len();
    let mut face_of = vec![NONE; n];
    let faces = map.faces();
    for (i, f) in faces.iter().enumerate() {
        for &h in f {
            face_of[h] = i;
        }
    }
    let outer = face_of[map.root];
    let hole_faces: HashSet<usize> = holes.iter().map(|&h| face_of[h]).collect();
    let bichromatic = |h: usize| map.spin[map.tail(h)] != map.spin[map.head(h)];
    if !bichromatic(start) {
        return Err(Error::Domain("the interface must start on a bichromatic edge".into()));
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut h = map.opp[start];
    loop {
        let f = face_of[h];
        if f == outer || hole_faces.contains(&f) || faces[f].len() != 3 {
            return Ok(InterfacePath { entries, exit: h, closed: f == outer });
        }
        if !seen.insert(f) {
            return Err(Error::Domain("the interface revisits a triangle".into()));
        }
        entries.push(h);
        let others: Vec<usize> = [map.next[h], map.next[map.next[h]]].into_iter().filter(|&g| bichromatic(g)).collect();
        if others.len() != 1 {
            return Err(Error::Domain("triangle without a unique exit for the interface".into()));
        }
        h = map.opp[others[0]];
    }
}

/// Ball of radius r around ρ in an explored map. Requires every
/// unexplored face to stay at distance > r from the root vertex, so the
/// ball cannot change under further peeling.
pub fn extract_ball(explored: &ExploredMap, r: usize) -> Result<BicoloredMap> {
    let mut m = explored.map.clone();
    m.root = explored.rho;
    let dist = m.distances_from_root();
    for &h in &explored.holes {
        let mut g = h;
        loop {
            if dist[m.tail(g)] <= r {
                return Err(Error::Domain(format!("exploration has not reached radius {r}")));
            }
            g = m.next[g];
            if g == h {
                break;
            }
        }
    }
    Ok(m.ball(r))
}

/// Options of the constructive ℙ_∞ ball sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallOptions {
    /// The ribbon stops once at least this many boundary edges separate
    /// the peel edge from every vertex within distance r+1 of the root, on
    /// both sides.
    pub margin: usize,
    /// Ribbon steps between two checks of the stopping rule.
    pub check_every: u64,
    pub max_ribbon_steps: u64,
    pub max_half_edges: usize,
}

impl Default for BallOptions {
    fn default() -> Self {
        BallOptions { margin: 40, check_every: 8, max_ribbon_steps: 1_000_000, max_half_edges: DEFAULT_HALF_EDGE_BUDGET }
    }
}

/// A sampled ℙ_∞ ball together with the explored map it was cut from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FullPlaneBall {
    pub ball: BicoloredMap,
    pub explored: ExploredMap,
    pub radius: usize,
    pub ribbon_steps: u64,
    pub left_steps: u64,
    pub right_steps: u64,
}

/// One of the two monochromatic half-planes glued to the ribbon. `tau` is
/// the colour of an excursion segment (the opposite of the rays).
struct Side {
    region: usize,
    tau: i8,
    state: BoundaryState,
    peel: Option<usize>,
    steps: u64,
}

/// ℙ_∞ ball of radius r: peel the ribbon along the interface until it has
/// moved away from the root, cut the unexplored region at the peel edge
/// into two monochromatic half-planes, and explore each of them under the
/// p = 0 half-plane law (spin-flipped on the + side), always peeling next
/// to the boundary vertex closest to the root, until every unexplored
/// region lies beyond distance r.
pub fn sample_ball_fullplane(law: &PeelingLaw, r: usize, seed: u64, stream: u64, opts: &BallOptions) -> Result<FullPlaneBall> {
    if !law.tables.critical {
        return Err(Error::MissingTable("the ball sampler needs the ν_c tables".into()));
    }
    let mut rng = run_rng(seed, stream);
    let (spins, rho, far, _) = initial_spins(Regime::FullPlane, 0, 0)?;
    let mut b = Builder::polygon(&spins, opts.max_half_edges)?;
    let (f, ts, hs) = far.expect("full-plane boundary has a far edge");
    b.far.insert(f, (ts, hs));
    b.virtual_edges.insert(f);
    b.deferred = Some(Vec::new());
    let root_vertex = b.vert[rho];
    let near = r + 1;

    // ribbon
    let mut state = BoundaryState::fullplane();
    let mut e = rho;
    let mut ribbon_steps = 0u64;
    loop {
        if ribbon_steps >= opts.max_ribbon_steps {
            return Err(Error::Budget(opts.max_ribbon_steps as usize));
        }
        let ev = law.sample(state, &mut rng)?.event;
        b.tag = Origin::Ribbon;
        let (nx, _) = b.peel(law, e, ev, 1, &mut rng)?;
        e = nx.expect("no End under ℙ_∞");
        state = step(state, ev)?;
        ribbon_steps += 1;
        if !ribbon_steps.is_multiple_of(opts.check_every) {
            continue;
        }
        b.resolve(law, root_vertex, near, &mut rng)?;
        let dist = b.distances(root_vertex);
        let gap = |fwd: bool, b: &Builder| {
            let mut g = e;
            let mut n = 0;
            loop {
                let v = if fwd { b.head(g) } else { b.vert[g] };
                if dist[v] <= near {
                    return n;
                }
                g = if fwd { b.bnext[g] } else { b.bprev[g] };
                if b.far.contains_key(&g) || n >= opts.margin {
                    return opts.margin;
                }
                n += 1;
            }
        };
        if gap(false, &b) >= opts.margin && gap(true, &b) >= opts.margin {
            break;
        }
    }

    // make sure e has real neighbours on both sides, then cut
    if b.far.contains_key(&b.bprev[e]) {
        let fe = b.bprev[e];
        b.subdivide(fe, true)?;
    }
    if b.far.contains_key(&b.bnext[e]) {
        let fe = b.bnext[e];
        b.subdivide(fe, false)?;
    }
    // The outer edge f = (t → s) becomes (t → x_R), (x_R → x_L), (x_L → s)
    // with x_L, x_R virtual points at infinity; the end of the ribbon is
    // the face (b → a), (a → x_L), (x_L → x_R), (x_R → b).
    let f = *b.far.keys().next().expect("one far edge");
    b.far.clear();
    let (pe, ne, pf, nf) = (b.bprev[e], b.bnext[e], b.bprev[f], b.bnext[f]);
    let (a, bb, t) = (b.vert[e], b.head(e), b.vert[f]);
    let first_ray = b.next[f];
    b.tag = Origin::Boundary;
    let xl = b.new_vertex(1);
    let xr = b.new_vertex(-1);
    let e_star = b.new_half_edge(bb)?;
    let m_left = b.new_half_edge(a)?;
    let k = b.new_half_edge(xl)?;
    let m_right = b.new_half_edge(xr)?;
    let k_star = b.new_half_edge(xr)?;
    let o_left = b.new_half_edge(xl)?;
    b.next[e_star] = m_left;
    b.next[m_left] = k;
    b.next[k] = m_right;
    b.next[m_right] = e_star;
    b.next[f] = k_star;
    b.next[k_star] = o_left;
    b.next[o_left] = first_ray;
    debug_assert_eq!(b.vert[first_ray], b.head(o_left));
    debug_assert_eq!(b.vert[f], t);
    b.opp[e] = e_star;
    b.opp[e_star] = e;
    b.opp[k] = k_star;
    b.opp[k_star] = k;
    b.virtual_edges.clear();
    b.virtual_edges.extend([k, k_star]);
    b.far.insert(o_left, (1, 1));
    b.far.insert(m_left, (1, 1));
    b.far.insert(f, (-1, -1));
    b.far.insert(m_right, (-1, -1));
    b.link(o_left, nf);
    b.link(pe, m_left);
    b.link(m_left, o_left);
    b.link(pf, f);
    b.link(f, m_right);
    b.link(m_right, ne);

    let mut sides = [
        Side { region: m_left, tau: -1, state: BoundaryState::halfplane(0), peel: None, steps: 0 },
        Side { region: m_right, tau: 1, state: BoundaryState::halfplane(0), peel: None, steps: 0 },
    ];
    let tags = [Origin::Left, Origin::Right];
    loop {
        b.resolve(law, root_vertex, near, &mut rng)?;
        let dist = b.distances(root_vertex);
        // closest boundary vertex of either side
        let mut best: Option<(usize, usize, usize)> = None;
        let mut stretch = None;
        for (i, side) in sides.iter().enumerate() {
            let start = side.region;
            let mut g = start;
            loop {
                let d = dist[b.vert[g]];
                if d <= r && best.is_none_or(|(bd, _, _)| d < bd) {
                    if b.far.contains_key(&g) {
                        stretch = Some(g);
                    } else {
                        best = Some((d, i, g));
                    }
                }
                g = b.bnext[g];
                if g == start {
                    break;
                }
            }
        }
        // a near vertex whose only outgoing boundary edge is a far one
        if let Some(g) = stretch {
            b.subdivide(g, false)?;
            continue;
        }
        let Some((_, i, g)) = best else { break };
        let side = &mut sides[i];
        let pe = side.peel.unwrap_or(g);
        let ev = law.sample(side.state, &mut rng)?;
        if ev.censored {
            return Err(Error::MissingTable("half-plane jump beyond the ζ table".into()));
        }
        b.tag = tags[i];
        let (nx, _) = b.peel(law, pe, ev.event, side.tau, &mut rng)?;
        side.state = step(side.state, ev.event)?;
        side.peel = if side.state.p == Some(0) { None } else { nx };
        side.steps += 1;
        // subdivision toward the tail moves the far edge
        let ray = -side.tau;
        side.region = b
            .far
            .iter()
            .filter(|(_, &(x, _))| x == ray)
            .map(|(&h, _)| h)
            .min()
            .ok_or_else(|| Error::Domain("far edge lost".into()))?;
    }
    let dist = b.distances(root_vertex);
    let mut g = e_star;
    loop {
        if dist[b.vert[g]] <= r {
            return Err(Error::Domain(format!("a half-plane swallow crossed the ribbon cut within radius {r}")));
        }
        g = b.next[g];
        if g == e_star {
            break;
        }
    }
    let (left_steps, right_steps) = (sides[0].steps, sides[1].steps);
    let (map, mut holes, origin) = b.finish(rho)?;
    holes.push(e_star);
    let explored = ExploredMap { map, rho, rho_dagger: None, holes, origin, steps: ribbon_steps, jump_fill_steps: None };
    let ball = extract_ball(&explored, r)?;
    Ok(FullPlaneBall { ball, explored, radius: r, ribbon_steps, left_steps, right_steps })
}

/// The triangle of `map` on the inner side of `rho`: the spin of its third
/// vertex and that vertex's signed offset along the outer boundary from
/// the tail of ρ (negative = before ρ), or `None` if it is not on the
/// outer boundary within `reach` steps. Both directions are searched and
/// the nearer match wins, so a boundary closed by a far edge is not read
/// the long way round.
pub fn root_triangle(map: &BicoloredMap, rho: usize, reach: usize) -> (i8, Option<i64>) {
    let x = map.opp[rho];
    let c = map.head(map.next[x]);
    let spin = map.spin[c];
    let mut forward = None;
    let mut g = rho;
    for i in 0..=reach {
        if map.tail(g) == c {
            forward = Some(i as i64);
            break;
        }
        g = map.next[g];
    }
    let mut prev: HashMap<usize, usize> = HashMap::new();
    let mut h = rho;
    loop {
        prev.insert(map.next[h], h);
        h = map.next[h];
        if h == rho {
            break;
        }
    }
    let mut backward = None;
    let mut g = rho;
    for i in 1..=reach {
        g = prev[&g];
        if map.tail(g) == c {
            backward = Some(-(i as i64));
            break;
        }
    }
    let off = match (forward, backward) {
        (Some(f), Some(b)) if -b < f => Some(b),
        (Some(f), _) => Some(f),
        (None, b) => b,
    };
    (spin, off)
}

/// Check that no edge has a left-half-plane triangle on one side and a
/// right-half-plane triangle on the other: the two glued half-planes only
/// meet the ribbon, the boundary and holes they swallowed.
pub fn provenance_consistent(ex: &ExploredMap) -> bool {
    let m = &ex.map;
    (0..m.opp.len()).all(|h| {
        let (a, b) = (ex.origin[h], ex.origin[m.opp[h]]);
        !matches!((a, b), (Origin::Left, Origin::Right) | (Origin::Right, Origin::Left))
    })
}

/// Histogram of the first event from `state`, with swallows of k ≥ `kmax`
/// pooled, as frequencies.
pub fn first_event_histogram(law: &PeelingLaw, state: BoundaryState, samples: u64, seed: u64, kmax: usize) -> Result<BTreeMap<String, f64>> {
    let mut rng = run_rng(seed, 0);
    let mut h: BTreeMap<String, f64> = BTreeMap::new();
    for _ in 0..samples {
        let key = match law.sample(state, &mut rng)?.event {
            Event::CPlus => "C+".to_string(),
            Event::CMinus => "C-".to_string(),
            Event::End => "End".to_string(),
            Event::L(k) if k < kmax => format!("L{k}"),
            Event::R(k) if k < kmax => format!("R{k}"),
            Event::L(_) => "L+".to_string(),
            Event::R(_) => "R+".to_string(),
        };
        *h.entry(key).or_default() += 1.0;
    }
    h.values_mut().for_each(|v| *v /= samples as f64);
    Ok(h)
}

/// Total-variation distance between two frequency tables.
pub fn total_variation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: HashSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys.into_iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientTables, TableConfig};
    use crate::peeling::{run, RunConfig, Stop};
    use std::sync::OnceLock;

    fn tables() -> &'static CoefficientTables {
        static T: OnceLock<CoefficientTables> = OnceLock::new();
        T.get_or_init(|| CoefficientTables::build(&TableConfig::small(crate::constants::nu_c::<f64>(), true)).unwrap())
    }

    fn trace(events: Vec<Event>, regime: Regime, p: usize, q: usize) -> PeelingTrace {
        PeelingTrace { regime: Some(regime), p, q, steps: events.len() as u64, events, ..Default::default() }
    }

    #[test]
    fn all_c_plus_is_a_fan() {
        let law = PeelingLaw::new(tables()).unwrap();
        let tr = trace(vec![Event::CPlus; 6], Regime::FullPlane, 0, 0);
        let ex = build_explored_map(&law, &tr, 1, 10_000).unwrap();
        ex.map.validate(1, true).unwrap();
        let tri = ex.map.faces().iter().filter(|f| f.len() == 3).count();
        assert_eq!(tri, 6);
        assert_eq!(ex.holes.len(), 1);
        // two rays, the far edge, six + frontier edges and the peel edge
        assert_eq!(face_len(&ex.map, ex.holes[0]), 10);
        // all triangles share the − vertex at the head of ρ
        let b = ex.map.head(ex.rho);
        for f in ex.map.faces().iter().filter(|f| f.len() == 3) {
            assert!(f.iter().any(|&h| ex.map.tail(h) == b));
        }
        let path = trace_interface(&ex.map, ex.rho, &ex.holes).unwrap();
        assert_eq!(path.entries.len(), 6);
        assert!(!path.closed);
    }

    fn face_len(m: &BicoloredMap, h: usize) -> usize {
        let mut n = 1;
        let mut g = m.next[h];
        while g != h {
            n += 1;
            g = m.next[g];
        }
        n
    }

    #[test]
    fn small_finite_maps() {
        let law = PeelingLaw::new(tables()).unwrap();
        for (p, q) in [(1, 1), (2, 3), (4, 2), (6, 6)] {
            let mut cfg = RunConfig::new(Regime::Finite, p, q, Stop::End);
            cfg.record = true;
            for s in 0..30 {
                let tr = run(&law, &cfg, 7, s).unwrap();
                let ex = build_explored_map(&law, &tr, 7, DEFAULT_HALF_EDGE_BUDGET).unwrap();
                ex.map.validate(0, true).unwrap();
                assert!(ex.map.has_dobrushin_boundary(p, q));
                assert!(ex.holes.is_empty());
                let path = trace_interface(&ex.map, ex.rho, &ex.holes).unwrap();
                assert!(path.closed);
                assert_eq!(Some(path.exit), ex.rho_dagger);
                assert_eq!(path.entries.len() as u64 + 1, tr.steps);
            }
        }
    }

    #[test]
    fn mono_polygons_fill() {
        let law = PeelingLaw::new(tables()).unwrap();
        let mut rng = run_rng(3, 0);
        for m in [1, 2, 5] {
            let mut b = Builder::polygon(&vec![1; m], 1_000_000).unwrap();
            b.fill(&law, 0, &mut rng).unwrap();
            let (map, holes, _) = b.finish(0).unwrap();
            assert!(holes.is_empty());
            map.validate(0, true).unwrap();
            assert!(map.spin.iter().all(|&s| s == 1 || s == -1));
        }
    }

    #[test]
    fn halfplane_jump_continues_interface() {
        let law = PeelingLaw::new(tables()).unwrap();
        let mut cfg = RunConfig::new(Regime::HalfPlane, 3, 0, Stop::Hitting(vec![0]));
        cfg.record = true;
        let mut checked = 0;
        for s in 0..40 {
            let tr = run(&law, &cfg, 11, s).unwrap();
            if tr.jump.is_none() || tr.jump_censored {
                continue;
            }
            let ex = build_explored_map(&law, &tr, 11, DEFAULT_HALF_EDGE_BUDGET).unwrap();
            ex.map.validate(1, true).unwrap();
            let path = trace_interface(&ex.map, ex.rho, &ex.holes).unwrap();
            assert!(path.closed);
            assert_eq!(Some(path.exit), ex.rho_dagger);
            let eta = tr.steps + ex.jump_fill_steps.unwrap();
            assert_eq!(path.entries.len() as u64 + 1, eta);
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn ball_sampler_small_radius() {
        let law = PeelingLaw::new(tables()).unwrap();
        let opts = BallOptions { margin: 10, ..Default::default() };
        for s in 0..5 {
            let fb = sample_ball_fullplane(&law, 1, 5, s, &opts).unwrap();
            fb.explored.map.validate(fb.explored.holes.len(), true).unwrap();
            assert!(provenance_consistent(&fb.explored));
            let d = fb.ball.distances_from_root();
            assert!(d.iter().all(|&x| x <= 1));
            assert!(fb.ball.num_edges() >= 1);
        }
    }

    #[test]
    fn balls_of_explored_maps() {
        let law = PeelingLaw::new(tables()).unwrap();
        let tr = trace(vec![Event::CMinus, Event::CPlus, Event::L(0)], Regime::FullPlane, 0, 0);
        let ex = build_explored_map(&law, &tr, 1, 10_000).unwrap();
        assert!(extract_ball(&ex, 0).is_err());

        let mut cfg = RunConfig::new(Regime::Finite, 3, 4, Stop::End);
        cfg.record = true;
        let tr = run(&law, &cfg, 2, 0).unwrap();
        let ex = build_explored_map(&law, &tr, 2, DEFAULT_HALF_EDGE_BUDGET).unwrap();
        let b0 = extract_ball(&ex, 0).unwrap();
        assert_eq!(b0.num_edges(), 1);
        assert_eq!(b0.spin, vec![1, -1]);
        let b1 = extract_ball(&ex, 1).unwrap();
        let b2 = extract_ball(&ex, 2).unwrap();
        assert!(b1.num_edges() <= b2.num_edges() && b1.num_vertices() <= b2.num_vertices());
    }

    #[test]
    fn tv_of_identical_tables_is_zero() {
        let a: BTreeMap<String, f64> = [("C+".to_string(), 0.5), ("C-".to_string(), 0.5)].into();
        assert_eq!(total_variation(&a, &a), 0.0);
        let b: BTreeMap<String, f64> = [("C+".to_string(), 1.0)].into();
        assert!((total_variation(&a, &b) - 0.5).abs() < 1e-15);
    }
}
