use std::sync::OnceLock;

use isingtri::coefficients::{CoefficientTables, TableConfig};
use isingtri::constants::{nu_c, sqrt7};
use proptest::prelude::*;

fn critical() -> &'static CoefficientTables {
    static T: OnceLock<CoefficientTables> = OnceLock::new();
    T.get_or_init(|| CoefficientTables::build(&TableConfig::small(nu_c(), true)).unwrap())
}

proptest! {
    #[test]
    fn zeta_symmetric_and_positive(p in 1usize..200, q in 1usize..200) {
        let t = critical();
        let (a, b) = (t.zeta_at(p, q).unwrap(), t.zeta_at(q, p).unwrap());
        prop_assert!(a > 0.0 && b > 0.0);
        prop_assert!((a - b).abs() <= 1e-6 * a, "ζ({},{}) = {} vs {}", p, q, a, b);
    }
}

#[test]
fn partial_sums_approach_disk_amplitude() {
    let t = critical();
    let z0 = (2.0 * sqrt7::<f64>() - 3.0) / 5.0;
    assert!((t.z0_c - z0).abs() < 1e-14);
    let mut s = 0.0;
    let mut scaled = Vec::new();
    for k in 1..=t.config.k_cut {
        s += t.w[k];
        assert!(s < z0);
        if k.is_power_of_two() && k >= 64 {
            scaled.push((z0 - s) * (k as f64).powf(4.0 / 3.0));
        }
    }
    // tail ~ K^{-4/3}: the rescaled remainder settles
    let last = scaled[scaled.len() - 1];
    let prev = scaled[scaled.len() - 2];
    assert!((last - prev).abs() < 0.02 * last, "{scaled:?}");
    assert!((t.w_total_fitted() - z0).abs() < 1e-9);
}

#[test]
fn laws_are_normalised() {
    let t = critical();
    assert!((t.normalization_infinite() - 1.0).abs() < 1e-9);
    assert!((t.normalization_mono().unwrap() - 1.0).abs() < 1e-10);
    for p in [1, 5, 50, 200] {
        let m = t.normalization_halfplane(p).unwrap();
        assert!((m - 1.0).abs() < 1e-7, "p = {p}: {m}");
    }
    for (p, q) in [(1, 1), (2, 1), (20, 20), (60, 60), (100, 3)] {
        let m = t.normalization_finite(p, q).unwrap();
        assert!((m - 1.0).abs() < 1e-7, "({p},{q}): {m}");
    }
}

#[test]
fn high_temperature_table() {
    let t = CoefficientTables::build(&TableConfig::small(1.2, false)).unwrap();
    assert!(!t.critical);
    assert!(t.w[1..].iter().all(|&w| w > 0.0));
    assert!((t.normalization_infinite() - 1.0).abs() < 1e-9);
    assert!(t.normalization_mono().is_err());
}

#[test]
fn save_and_load_round_trip() {
    let dir = std::env::temp_dir().join(format!("isingtri-coeff-{}", std::process::id()));
    let path = dir.join("tables.json");
    let t = critical();
    t.save(&path).unwrap();
    let back = CoefficientTables::load(&path).unwrap();
    assert_eq!(back.config, t.config);
    assert_eq!(back.w, t.w);
    assert_eq!(back.alpha, t.alpha);
    for (p, q) in [(1, 1), (7, 3), (300, 100)] {
        assert_eq!(back.zeta_at(p, q), t.zeta_at(p, q));
    }
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(CoefficientTables::load(&path).is_err());
}
