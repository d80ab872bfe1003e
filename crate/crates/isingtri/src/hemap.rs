//! Rooted half-edge maps with vertex spins.
//!
//! Half-edge `h` runs from vertex `vert[h]` to `vert[opp[h]]` and has its
//! face on the left; `next[h]` is the following half-edge of that face.
//! The face containing `root` is the outer face.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BicoloredMap {
    pub opp: Vec<usize>,
    pub next: Vec<usize>,
    pub vert: Vec<usize>,
    /// +1 / −1, or 0 where the spin is left unassigned.
    pub spin: Vec<i8>,
    pub root: usize,
}

/// Orbits of a permutation, each starting at its smallest element.
fn orbits(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut h = s;
        while !seen[h] {
            seen[h] = true;
            cyc.push(h);
            h = perm[h];
        }
        out.push(cyc);
    }
    out
}

impl BicoloredMap {
    /// Build from the edge involution and face permutation; vertices are
    /// the orbits of h ↦ next[opp[h]].
    pub fn from_permutations(opp: Vec<usize>, next: Vec<usize>, root: usize) -> Self {
        let rot: Vec<usize> = (0..opp.len()).map(|h| next[opp[h]]).collect();
        let mut vert = vec![0; opp.len()];
        let cycles = orbits(&rot);
        for (v, cyc) in cycles.iter().enumerate() {
            for &h in cyc {
                vert[h] = v;
            }
        }
        let nv = cycles.len();
        BicoloredMap { opp, next, vert, spin: vec![0; nv], root }
    }

    /// The single-edge map with spins `a` at the root tail and `b` at its head.
    pub fn edge_map(a: i8, b: i8) -> Self {
        BicoloredMap { opp: vec![1, 0], next: vec![1, 0], vert: vec![0, 1], spin: vec![a, b], root: 0 }
    }

    pub fn num_half_edges(&self) -> usize {
        self.opp.len()
    }

    pub fn num_edges(&self) -> usize {
        self.opp.len() / 2
    }

    pub fn num_vertices(&self) -> usize {
        self.spin.len()
    }

    pub fn tail(&self, h: usize) -> usize {
        self.vert[h]
    }

    pub fn head(&self, h: usize) -> usize {
        self.vert[self.opp[h]]
    }

    /// Next half-edge leaving the same vertex (clockwise).
    pub fn next_around_vertex(&self, h: usize) -> usize {
        self.next[self.opp[h]]
    }

    pub fn faces(&self) -> Vec<Vec<usize>> {
        orbits(&self.next)
    }

    pub fn face_of(&self, h: usize) -> Vec<usize> {
        let mut out = vec![h];
        let mut g = self.next[h];
        while g != h {
            out.push(g);
            g = self.next[g];
        }
        out
    }

    /// Half-edges of the outer face starting at the root.
    pub fn boundary_walk(&self) -> Vec<usize> {
        self.face_of(self.root)
    }

    /// Spins of the tails along the boundary walk.
    pub fn boundary_spins(&self) -> Vec<i8> {
        self.boundary_walk().iter().map(|&h| self.spin[self.vert[h]]).collect()
    }

    pub fn is_monochromatic(&self, h: usize) -> bool {
        self.spin[self.tail(h)] == self.spin[self.head(h)]
    }

    pub fn monochromatic_edges(&self) -> usize {
        (0..self.opp.len()).filter(|&h| h < self.opp[h] && self.is_monochromatic(h)).count()
    }

    /// Structural audit: permutation consistency, connectivity, Euler's
    /// relation, and `max_holes` non-root faces of degree other than 3
    /// besides the outer face. With `simple_outer` the outer face must not
    /// repeat a vertex.
    pub fn validate(&self, max_holes: usize, simple_outer: bool) -> Result<(), String> {
        let n = self.opp.len();
        if n == 0 || n % 2 == 1 || self.next.len() != n || self.vert.len() != n {
            return Err("array sizes inconsistent".into());
        }
        if self.root >= n {
            return Err("root out of range".into());
        }
        let mut hit = vec![false; n];
        for h in 0..n {
            let o = self.opp[h];
            if o >= n || o == h || self.opp[o] != h {
                return Err(format!("opp is not a fixed-point-free involution at {h}"));
            }
            let x = self.next[h];
            if x >= n || hit[x] {
                return Err(format!("next is not a permutation at {h}"));
            }
            hit[x] = true;
            if self.vert[x] != self.vert[o] {
                return Err(format!("next[{h}] does not start at the head of {h}"));
            }
        }
        if self.vert.iter().any(|&v| v >= self.spin.len()) {
            return Err("vertex index out of range".into());
        }
        // the vertex labelling must be exactly the rotation orbits
        let rot: Vec<usize> = (0..n).map(|h| self.next[self.opp[h]]).collect();
        let vcycles = orbits(&rot);
        if vcycles.len() != self.spin.len() {
            return Err(format!("{} rotation orbits but {} vertices", vcycles.len(), self.spin.len()));
        }
        for cyc in &vcycles {
            if cyc.iter().any(|&h| self.vert[h] != self.vert[cyc[0]]) {
                return Err("vertex label differs within a rotation orbit".into());
            }
        }
        // connectivity
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.root]);
        seen[self.root] = true;
        let mut count = 0;
        while let Some(h) = queue.pop_front() {
            count += 1;
            for g in [self.opp[h], self.next[h]] {
                if !seen[g] {
                    seen[g] = true;
                    queue.push_back(g);
                }
            }
        }
        if count != n {
            return Err("map is not connected".into());
        }
        let faces = self.faces();
        let v = self.spin.len() as i64;
        let e = (n / 2) as i64;
        let f = faces.len() as i64;
        if v - e + f != 2 {
            return Err(format!("Euler relation fails: V={v} E={e} F={f}"));
        }
        let outer = self.boundary_walk();
        let mut holes = 0;
        for face in &faces {
            if face.contains(&self.root) {
                continue;
            }
            if face.len() != 3 {
                holes += 1;
            }
        }
        if holes > max_holes {
            return Err(format!("{holes} non-triangular inner faces"));
        }
        if simple_outer {
            let mut verts: Vec<usize> = outer.iter().map(|&h| self.vert[h]).collect();
            verts.sort_unstable();
            verts.dedup();
            if verts.len() != outer.len() {
                return Err("outer boundary is not simple".into());
            }
        }
        Ok(())
    }

    /// Check that the boundary read from the root is +^p −^q.
    pub fn has_dobrushin_boundary(&self, p: usize, q: usize) -> bool {
        let s = self.boundary_spins();
        s.len() == p + q && s[..p].iter().all(|&x| x == 1) && s[p..].iter().all(|&x| x == -1)
    }

    /// Breadth-first relabelling from the root; equal codes ⇔ isomorphic rooted maps.
    pub fn canonical_code(&self) -> Vec<u32> {
        let n = self.opp.len();
        let mut label = vec![u32::MAX; n];
        let mut order = Vec::with_capacity(n);
        label[self.root] = 0;
        order.push(self.root);
        let mut i = 0;
        while i < order.len() {
            let h = order[i];
            for g in [self.next[h], self.opp[h]] {
                if label[g] == u32::MAX {
                    label[g] = order.len() as u32;
                    order.push(g);
                }
            }
            i += 1;
        }
        let mut code = Vec::with_capacity(2 * n + 1);
        code.push(n as u32);
        for &h in &order {
            code.push(label[self.next[h]]);
            code.push(label[self.opp[h]]);
        }
        code
    }

    /// Canonical code extended with the vertex spins in breadth-first order.
    pub fn spin_code(&self) -> Vec<i32> {
        let mut code: Vec<i32> = self.canonical_code().into_iter().map(|x| x as i32).collect();
        let n = self.opp.len();
        let mut seen = vec![false; n];
        let mut order = vec![self.root];
        seen[self.root] = true;
        let mut i = 0;
        while i < order.len() {
            let h = order[i];
            for g in [self.next[h], self.opp[h]] {
                if !seen[g] {
                    seen[g] = true;
                    order.push(g);
                }
            }
            i += 1;
        }
        code.extend(order.iter().map(|&h| self.spin[self.vert[h]] as i32));
        code
    }

    /// Graph distances from the tail of the root.
    pub fn distances_from_root(&self) -> Vec<usize> {
        let nv = self.spin.len();
        let mut adj = vec![Vec::new(); nv];
        for h in 0..self.opp.len() {
            adj[self.vert[h]].push(self.head(h));
        }
        let mut dist = vec![usize::MAX; nv];
        let s = self.vert[self.root];
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

    /// Submap made of the triangles whose three vertices lie within distance
    /// `r` of the root vertex, plus the root edge. Everything else is
    /// replaced by holes.
    pub fn ball(&self, r: usize) -> BicoloredMap {
        let dist = self.distances_from_root();
        let n = self.opp.len();
        let mut keep = vec![false; n];
        let mut face_id = vec![usize::MAX; n];
        for (i, face) in self.faces().iter().enumerate() {
            for &h in face {
                face_id[h] = i;
            }
            let inner = !face.contains(&self.root) && face.len() == 3;
            if inner && face.iter().all(|&h| dist[self.vert[h]] <= r) {
                for &h in face {
                    keep[h] = true;
                }
            }
        }
        // old half-edge -> new index, for kept half-edges and their partners
        let mut idx: HashMap<usize, usize> = HashMap::new();
        let mut old_of = Vec::new();
        let add = |h: usize, idx: &mut HashMap<usize, usize>, old_of: &mut Vec<usize>| {
            if let std::collections::hash_map::Entry::Vacant(e) = idx.entry(h) {
                e.insert(old_of.len());
                old_of.push(h);
            }
        };
        add(self.root, &mut idx, &mut old_of);
        add(self.opp[self.root], &mut idx, &mut old_of);
        for h in 0..n {
            if keep[h] {
                add(h, &mut idx, &mut old_of);
                add(self.opp[h], &mut idx, &mut old_of);
            }
        }
        let in_ball = |h: usize| idx.contains_key(&h);
        let is_face_kept = |h: usize| keep[h];
        let m = old_of.len();
        let mut opp = vec![0; m];
        let mut next = vec![usize::MAX; m];
        for (i, &h) in old_of.iter().enumerate() {
            opp[i] = idx[&self.opp[h]];
        }
        for (i, &h) in old_of.iter().enumerate() {
            if is_face_kept(h) {
                next[i] = idx[&self.next[h]];
            } else {
                // walk around the head through discarded faces
                let mut e = self.next[h];
                while !(in_ball(e) && !is_face_kept(e)) {
                    e = self.next[self.opp[e]];
                }
                next[i] = idx[&e];
            }
        }
        let mut out = BicoloredMap::from_permutations(opp, next, 0);
        // carry spins over through the tails
        let mut spin = vec![0i8; out.spin.len()];
        for (i, &h) in old_of.iter().enumerate() {
            spin[out.vert[i]] = self.spin[self.vert[h]];
        }
        out.spin = spin;
        out
    }

    /// Number of vertices (for containment checks between balls).
    pub fn spin_histogram(&self) -> (usize, usize) {
        let plus = self.spin.iter().filter(|&&s| s == 1).count();
        (plus, self.spin.len() - plus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Triangle with outer face of degree 3 on the root side.
    fn triangle() -> BicoloredMap {
        // outer half-edges 0,1,2 ; inner 3,4,5 with opp(i) = i+3
        let opp = vec![3, 4, 5, 0, 1, 2];
        let next = vec![1, 2, 0, 5, 3, 4];
        let mut m = BicoloredMap::from_permutations(opp, next, 0);
        m.spin = vec![1, 1, -1];
        m
    }

    #[test]
    fn edge_map_valid() {
        let m = BicoloredMap::edge_map(1, -1);
        m.validate(0, true).unwrap();
        assert_eq!(m.num_vertices(), 2);
        assert_eq!(m.monochromatic_edges(), 0);
        assert_eq!(m.boundary_spins(), vec![1, -1]);
    }

    #[test]
    fn triangle_valid() {
        let m = triangle();
        m.validate(0, true).unwrap();
        assert_eq!(m.faces().len(), 2);
        assert_eq!(m.num_vertices(), 3);
    }

    #[test]
    fn broken_map_rejected() {
        let mut m = triangle();
        m.next.swap(3, 4);
        assert!(m.validate(0, true).is_err());
    }

    #[test]
    fn canonical_code_ignores_labels() {
        let m = triangle();
        // relabel half-edges by a permutation
        let perm = [4usize, 2, 5, 0, 3, 1];
        let mut opp = vec![0; 6];
        let mut next = vec![0; 6];
        for h in 0..6 {
            opp[perm[h]] = perm[m.opp[h]];
            next[perm[h]] = perm[m.next[h]];
        }
        let m2 = BicoloredMap::from_permutations(opp, next, perm[m.root]);
        assert_eq!(m.canonical_code(), m2.canonical_code());
        assert_ne!(m.canonical_code(), BicoloredMap::edge_map(1, 1).canonical_code());
    }

    #[test]
    fn ball_zero_is_root_edge() {
        let m = triangle();
        let b = m.ball(0);
        assert_eq!(b.num_edges(), 1);
        assert_eq!(b.spin, vec![m.spin[m.tail(m.root)], m.spin[m.head(m.root)]]);
        b.validate(1, false).unwrap();
    }
}
