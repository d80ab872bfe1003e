use isingtri::constants::{
    b_hat, c_infinity, c_lambda, critical_point, drift, mu, nu_c, nu_of_s, s_c, s_of_nu, s_perc, t_crit_s, u_c_of_s,
    AConvention, CriticalExpansion, Parametrization, Regime,
};
use isingtri::scalar::{bits_for_digits, set_hp_bits};
use isingtri::{Hp, Real};
use num_complex::Complex;
use proptest::prelude::*;

proptest! {
    #[test]
    fn critical_line_invariants(nu in 1.0001f64..1.3779) {
        let cp = critical_point(&nu).unwrap();
        prop_assert!((nu_of_s(&cp.s).unwrap() - nu).abs() < 1e-12);
        prop_assert!((cp.t_c.powi(3) - t_crit_s(&cp.s).unwrap()).abs() < 1e-14);
        prop_assert!(cp.t_c > 0.0);
        let norm = 2.0 * cp.t_c / cp.u_c * (1.0 + cp.z0_c);
        prop_assert!((norm - 1.0).abs() < 1e-12, "normalization {}", norm);
        prop_assert!((cp.u_c - u_c_of_s(&cp.s).unwrap()).abs() < 1e-12 * cp.u_c);
        prop_assert_eq!(cp.tail_exponent, 2.5);
        // f64 cancels badly as S → S_c, so the zero is checked in high precision
        set_hp_bits(bits_for_digits(64));
        let d = drift(&Hp::from_f64(nu)).unwrap();
        prop_assert!(d.abs() < Hp::ratio(1, 10).powi(35));
    }

    #[test]
    fn high_temperature_bivariate_symmetric(
        nu in 1.05f64..1.35, h in -0.2f64..0.2, k in -0.2f64..0.2, hi in -0.1f64..0.1, ki in -0.1f64..0.1
    ) {
        let p = Parametrization::<f64>::for_nu(&nu).unwrap();
        let (h, k) = (Complex::new(h, hi), Complex::new(k, ki));
        let a = p.z_bivariate(&h, &k).unwrap();
        let b = p.z_bivariate(&k, &h).unwrap();
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-3));
    }

    #[test]
    fn b_hat_positive_and_finite(f in 1e-6f64..0.999_999) {
        let s = s_perc::<f64>() + f * (s_c::<f64>() - s_perc::<f64>());
        let b = b_hat(&s).unwrap();
        prop_assert!(b > 0.0 && b.is_finite());
    }
}

#[test]
fn t_crit_positive_on_the_critical_line() {
    for i in 1..=400 {
        let s = s_c::<f64>() * i as f64 / 400.0;
        assert!(t_crit_s(&s).unwrap() > 0.0, "S = {s}");
    }
}

#[test]
fn drift_vanishes_below_and_equals_mu_at_criticality() {
    for nu in [1.06, 1.13, 1.21, 1.28, 1.34] {
        assert!(drift(&nu).unwrap().abs() < 1e-12, "ν = {nu}");
    }
    assert!((drift(&nu_c::<f64>()).unwrap() - mu::<f64>()).abs() < 1e-13);
}

/// c_∞(λ) from its definition against the expansion constants.
#[test]
fn c_infinity_magnitude_identity() {
    let p = Parametrization::<f64>::critical();
    for conv in [AConvention::Corrected, AConvention::Printed] {
        let e = CriticalExpansion::<f64>::new(conv).unwrap();
        let k = (2.0 * p.t_c * e.a0 * (e.a_at_uc - e.a0) / (e.b * p.u_c())).abs();
        for i in 0..=24 {
            let lambda = 0.05 * 1.3f64.powi(i);
            let direct = 4.0 / 3.0 * k / (c_lambda(lambda, Regime::Critical).unwrap() * lambda.powf(7.0 / 3.0));
            let got = c_infinity(lambda).unwrap();
            assert!((got - direct).abs() < 1e-11 * got, "λ = {lambda}: {got} vs {direct}");
        }
    }
}

#[test]
fn critical_point_to_sixty_digits() {
    set_hp_bits(bits_for_digits(64));
    let nu = nu_c::<Hp>();
    let p = Parametrization::<Hp>::for_nu(&nu).unwrap();
    let tol = Hp::ratio(1, 10).powi(58);
    let one = Hp::from_int(1);
    assert!((p.normalization() - one.clone()).abs() < tol);
    assert!((s_of_nu(&nu).unwrap() - s_c::<Hp>()).abs() < tol);
    let t = "0.2345162630".parse::<Hp>().unwrap();
    assert!((p.t_c.clone() - t).abs() < Hp::ratio(1, 10).powi(10));
    let r = "0.3428648565".parse::<Hp>().unwrap();
    assert!((p.ratio() - r).abs() < Hp::ratio(1, 10).powi(10));
}
