use std::collections::BTreeMap;
use std::sync::OnceLock;

use isingtri::coefficients::{CoefficientTables, TableConfig};
use isingtri::constants::nu_c;
use isingtri::explore::{
    build_explored_map, extract_ball, first_event_histogram, provenance_consistent, root_triangle, sample_ball_fullplane,
    total_variation, trace_interface, BallOptions, DEFAULT_HALF_EDGE_BUDGET,
};
use isingtri::peeling::{run, BoundaryState, PeelingLaw, Regime, RunConfig, Stop};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tables() -> &'static CoefficientTables {
    static T: OnceLock<CoefficientTables> = OnceLock::new();
    T.get_or_init(|| CoefficientTables::build(&TableConfig::small(nu_c(), true)).unwrap())
}

fn law() -> PeelingLaw<'static> {
    PeelingLaw::new(tables()).unwrap()
}

#[test]
fn large_polygon_first_step_is_close_to_full_plane() {
    let law = law();
    let a = first_event_histogram(&law, BoundaryState::finite(100, 100), 100_000, 1, 10).unwrap();
    let b = first_event_histogram(&law, BoundaryState::fullplane(), 100_000, 2, 10).unwrap();
    let tv = total_variation(&a, &b);
    assert!(tv <= 0.05, "TV {tv}");
}

fn class(spin: i8, offset: Option<i64>) -> (i8, i64) {
    // offsets outside [-2, 3] pooled by side; None (inner vertex) is 99
    let o = match offset {
        None => 99,
        Some(o) if o > 3 => 4,
        Some(o) if o < -2 => -3,
        Some(o) => o,
    };
    (spin, o)
}

fn flipped((s, o): (i8, i64)) -> (i8, i64) {
    (-s, if o == 99 { 99 } else { 1 - o })
}

/// Global spin flip composed with reflection preserves the full-plane law:
/// the root triangle's third vertex (spin, offset from ρ) must be as likely
/// as its image (−spin, 1 − offset).
#[test]
fn root_triangle_flip_symmetry() {
    let law = law();
    let opts = BallOptions { margin: 10, ..Default::default() };
    let samples = 400;
    let mut counts: BTreeMap<(i8, i64), f64> = BTreeMap::new();
    let mut failed = 0;
    for s in 0..samples {
        match sample_ball_fullplane(&law, 1, 31, s, &opts) {
            Ok(fb) => {
                assert!(provenance_consistent(&fb.explored));
                let (spin, off) = root_triangle(&fb.explored.map, fb.explored.rho, 64);
                *counts.entry(class(spin, off)).or_default() += 1.0;
            }
            Err(_) => failed += 1,
        }
    }
    assert!(failed * 50 <= samples, "{failed} failed samples");
    let mut chi2 = 0.0;
    let mut df = 0;
    for (&c, &n) in &counts {
        let f = flipped(c);
        if f <= c {
            continue;
        }
        let m = counts.get(&f).copied().unwrap_or(0.0);
        chi2 += (n - m).powi(2) / (n + m);
        df += 1;
    }
    for &c in counts.keys() {
        if flipped(c) < c && !counts.contains_key(&flipped(c)) {
            chi2 += counts[&c];
            df += 1;
        }
    }
    assert!(df >= 2, "{counts:?}");
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "χ² {chi2} on {df}: p = {p}, {counts:?}");
}

#[test]
fn finite_explorations_are_valid_maps() {
    let law = law();
    let mut cfg = RunConfig::new(Regime::Finite, 20, 20, Stop::End);
    cfg.record = true;
    for s in 0..100 {
        let tr = run(&law, &cfg, 12, s).unwrap();
        let ex = build_explored_map(&law, &tr, 12, DEFAULT_HALF_EDGE_BUDGET).unwrap();
        let m = &ex.map;
        m.validate(0, true).unwrap();
        assert!(m.has_dobrushin_boundary(20, 20));
        assert_eq!(m.num_vertices() + m.faces().len(), m.num_edges() + 2);
        let path = trace_interface(m, ex.rho, &ex.holes).unwrap();
        assert!(path.closed);
        assert_eq!(path.entries.len() as u64 + 1, tr.steps);
        let mut prev = (0, 0);
        for r in 0..4 {
            let b = extract_ball(&ex, r).unwrap();
            b.validate(usize::MAX, false).unwrap();
            assert!(b.num_edges() >= prev.0 && b.num_vertices() >= prev.1);
            prev = (b.num_edges(), b.num_vertices());
        }
    }
}

#[test]
fn ball_sampler_reproducible() {
    let law = law();
    let opts = BallOptions::default();
    let a = sample_ball_fullplane(&law, 2, 8, 3, &opts).unwrap();
    let b = sample_ball_fullplane(&law, 2, 8, 3, &opts).unwrap();
    assert_eq!(a.ball.canonical_code(), b.ball.canonical_code());
    assert_eq!(a.ball.spin_code(), b.ball.spin_code());
    assert!(a.ball.distances_from_root().iter().all(|&d| d <= 2));
}
