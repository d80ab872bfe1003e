use std::collections::HashSet;

use isingtri::enumerator::{enumerate_maps, spin_sum, Oracle};
use isingtri::NuPolynomial;
use num_bigint::BigInt;

#[test]
fn every_map_is_a_valid_dobrushin_triangulation() {
    for s in 1..=5 {
        for p in 0..=s {
            let q = s - p;
            let maps = enumerate_maps(p, q, 7).unwrap();
            let codes: HashSet<Vec<u32>> = maps.iter().map(|m| m.canonical_code()).collect();
            assert_eq!(codes.len(), maps.len(), "({p},{q}) duplicates");
            for m in &maps {
                m.validate(0, true).unwrap();
                assert!(m.has_dobrushin_boundary(p, q));
                let faces = m.faces().len();
                assert_eq!(m.num_vertices() + faces, m.num_edges() + 2, "Euler");
            }
        }
    }
}

#[test]
fn oracle_sums_spin_sums_by_edge_count() {
    for (p, q) in [(1, 0), (2, 1), (2, 2)] {
        let maps = enumerate_maps(p, q, 6).unwrap();
        let mut oracle = Oracle::new(6);
        for n in 0..=6 {
            let mut total = NuPolynomial::default();
            for m in maps.iter().filter(|m| m.num_edges() == n) {
                total.add_assign_ref(&spin_sum(m).unwrap());
            }
            assert_eq!(total, oracle.z(p, q, n).unwrap(), "({p},{q},{n})");
        }
    }
}

#[test]
fn global_spin_flip_and_unit_weight() {
    let mut oracle = Oracle::new(8);
    for s in 1..=6 {
        for p in 0..=s {
            let q = s - p;
            for n in 0..=8 {
                let z = oracle.z(p, q, n).unwrap();
                assert_eq!(z, oracle.z(q, p, n).unwrap(), "({p},{q},{n})");
                let shapes = oracle.shapes(s, n).unwrap();
                let count: BigInt = shapes.iter().map(|m| BigInt::from(1u64) << (m.num_vertices() - s)).sum();
                assert_eq!(z.eval_int(&BigInt::from(1)), count, "ν = 1 at ({p},{q},{n})");
            }
        }
    }
}
