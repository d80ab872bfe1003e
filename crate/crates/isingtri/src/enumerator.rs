//! Brute-force enumeration of small triangulations of a polygon.
//!
//! Maps are produced by gluing F labelled triangles and one outer m-gon
//! along every perfect matching of their sides, keeping the connected
//! planar gluings whose outer face is a simple cycle. Every rooted map
//! arises from exactly F!·3^F matchings; the canonical code removes the
//! duplicates and the multiplicity is checked.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::hemap::BicoloredMap;
use crate::poly::NuPolynomial;

pub const DEFAULT_EDGE_BUDGET: usize = 10;
pub const MAX_INTERNAL_VERTICES: usize = 12;

/// Distinct rooted triangulations of the m-gon with n edges, boundary
/// spins unassigned, plus the raw number of valid gluings.
#[derive(Clone, Debug)]
pub struct Shapes {
    pub maps: Vec<BicoloredMap>,
    pub gluings: u64,
    pub triangles: usize,
}

struct Gluer {
    next: Vec<usize>,
    opp: Vec<usize>,
    m: usize,
    found: BTreeMap<Vec<u32>, BicoloredMap>,
    gluings: u64,
}

impl Gluer {
    fn recurse(&mut self) {
        let n = self.opp.len();
        let Some(a) = (0..n).find(|&h| self.opp[h] == usize::MAX) else {
            self.finish();
            return;
        };
        for b in (a + 1)..n {
            if self.opp[b] != usize::MAX {
                continue;
            }
            self.opp[a] = b;
            self.opp[b] = a;
            self.recurse();
            self.opp[a] = usize::MAX;
            self.opp[b] = usize::MAX;
        }
    }

    fn finish(&mut self) {
        let map = BicoloredMap::from_permutations(self.opp.clone(), self.next.clone(), 0);
        if map.validate(0, true).is_err() {
            return;
        }
        debug_assert_eq!(map.boundary_walk().len(), self.m);
        self.gluings += 1;
        self.found.entry(map.canonical_code()).or_insert(map);
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// All rooted triangulations of the m-gon with exactly n edges.
pub fn shapes(m: usize, n: usize, max_edges: usize) -> Result<Shapes> {
    if n > max_edges {
        return Err(Error::Capacity { requested: n, budget: max_edges });
    }
    if m == 0 || 2 * n < m || !(2 * n - m).is_multiple_of(3) {
        return Ok(Shapes { maps: Vec::new(), gluings: 0, triangles: 0 });
    }
    let f = (2 * n - m) / 3;
    let total = m + 3 * f;
    let mut next = vec![0; total];
    for i in 0..m {
        next[i] = (i + 1) % m;
    }
    for j in 0..f {
        let b = m + 3 * j;
        next[b] = b + 1;
        next[b + 1] = b + 2;
        next[b + 2] = b;
    }
    let mut g = Gluer { next, opp: vec![usize::MAX; total], m, found: BTreeMap::new(), gluings: 0 };
    g.recurse();
    let maps: Vec<BicoloredMap> = g.found.into_values().collect();
    let mult = factorial(f) * 3u64.pow(f as u32);
    if maps.len() as u64 * mult != g.gluings {
        return Err(Error::InconsistentEvent {
            event: format!("{} gluings", g.gluings),
            state: format!("{} maps × {mult}", maps.len()),
        });
    }
    Ok(Shapes { maps, gluings: g.gluings, triangles: f })
}

fn set_boundary_spins(map: &mut BicoloredMap, p: usize) {
    for (i, h) in map.boundary_walk().into_iter().enumerate() {
        let v = map.vert[h];
        map.spin[v] = if i < p { 1 } else { -1 };
    }
}

/// Each rooted triangulation of the (p,q)-gon with at most `max_edges`
/// edges, boundary spins +^p −^q from the root, internal spins 0.
pub fn enumerate_maps(p: usize, q: usize, max_edges: usize) -> Result<Vec<BicoloredMap>> {
    if p + q == 0 {
        return Err(Error::Domain("empty boundary".into()));
    }
    let mut out = Vec::new();
    for n in 0..=max_edges {
        for mut map in shapes(p + q, n, max_edges.max(DEFAULT_EDGE_BUDGET))?.maps {
            set_boundary_spins(&mut map, p);
            out.push(map);
        }
    }
    Ok(out)
}

/// Σ over internal spin assignments of ν^{#monochromatic edges}.
pub fn spin_sum(map: &BicoloredMap) -> Result<NuPolynomial> {
    let free: Vec<usize> = (0..map.num_vertices()).filter(|&v| map.spin[v] == 0).collect();
    if free.len() > MAX_INTERNAL_VERTICES {
        return Err(Error::Capacity { requested: free.len(), budget: MAX_INTERNAL_VERTICES });
    }
    let edges: Vec<(usize, usize)> =
        (0..map.num_half_edges()).filter(|&h| h < map.opp[h]).map(|h| (map.tail(h), map.head(h))).collect();
    let mut counts = vec![BigInt::zero(); edges.len() + 1];
    let mut spin = map.spin.clone();
    for mask in 0u32..(1u32 << free.len()) {
        for (i, &v) in free.iter().enumerate() {
            spin[v] = if mask >> i & 1 == 1 { -1 } else { 1 };
        }
        let mono = edges.iter().filter(|&&(a, b)| spin[a] == spin[b]).count();
        counts[mono] += BigInt::one();
    }
    Ok(NuPolynomial::from_coeffs(counts))
}

/// Memoised oracle: shapes are shared between all (p,q) with the same p+q.
#[derive(Default)]
pub struct Oracle {
    budget: usize,
    cache: HashMap<(usize, usize), Vec<BicoloredMap>>,
}

impl Oracle {
    pub fn new(budget: usize) -> Self {
        Oracle { budget, cache: HashMap::new() }
    }

    pub fn shapes(&mut self, m: usize, n: usize) -> Result<&[BicoloredMap]> {
        if !self.cache.contains_key(&(m, n)) {
            let s = shapes(m, n, self.budget)?;
            self.cache.insert((m, n), s.maps);
        }
        Ok(&self.cache[&(m, n)])
    }

    /// [tⁿ]z_{p,q}(ν) by brute force.
    pub fn z(&mut self, p: usize, q: usize, n: usize) -> Result<NuPolynomial> {
        if p + q == 0 {
            return Ok(NuPolynomial::zero());
        }
        let mut acc = NuPolynomial::zero();
        for map in self.shapes(p + q, n)? {
            let mut map = map.clone();
            set_boundary_spins(&mut map, p);
            acc.add_assign_ref(&spin_sum(&map)?);
        }
        Ok(acc)
    }
}

pub fn z_oracle(p: usize, q: usize, n: usize) -> Result<NuPolynomial> {
    Oracle::new(DEFAULT_EDGE_BUDGET).z(p, q, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_map_only() {
        let maps = enumerate_maps(1, 1, 1).unwrap();
        assert_eq!(maps.len(), 1);
        assert_eq!(maps[0].num_edges(), 1);
        assert!(enumerate_maps(1, 1, 0).unwrap().is_empty());
    }

    #[test]
    fn base_values() {
        assert_eq!(z_oracle(1, 1, 1).unwrap(), NuPolynomial::from_i64s(&[1]));
        assert_eq!(z_oracle(2, 0, 1).unwrap(), NuPolynomial::nu());
        assert_eq!(z_oracle(1, 0, 2).unwrap(), NuPolynomial::from_i64s(&[0, 1, 1]));
    }

    #[test]
    fn maps_satisfy_invariants() {
        for (p, q) in [(1, 0), (2, 0), (1, 1), (2, 1), (2, 2)] {
            for m in enumerate_maps(p, q, 6).unwrap() {
                m.validate(0, true).unwrap();
                assert!(m.has_dobrushin_boundary(p, q));
            }
        }
    }

    #[test]
    fn spin_flip_symmetry() {
        let mut o = Oracle::new(8);
        for (p, q, n) in [(2, 1, 3), (3, 1, 5), (1, 2, 6), (3, 0, 6)] {
            assert_eq!(o.z(p, q, n).unwrap(), o.z(q, p, n).unwrap());
        }
    }

    #[test]
    fn nu_one_counts_maps() {
        let mut o = Oracle::new(8);
        for (p, q, n) in [(1, 0, 5), (2, 1, 6), (1, 1, 4)] {
            let maps = o.shapes(p + q, n).unwrap().to_vec();
            let expect: BigInt = maps
                .iter()
                .map(|m| BigInt::from(1u64 << (m.num_vertices() - (p + q))))
                .sum();
            assert_eq!(o.z(p, q, n).unwrap().eval_int(&BigInt::one()), expect);
        }
    }

    #[test]
    fn budget_error() {
        assert!(matches!(shapes(2, 12, 10), Err(Error::Capacity { .. })));
    }
}
