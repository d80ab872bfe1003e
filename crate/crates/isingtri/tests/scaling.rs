use std::sync::OnceLock;

use isingtri::coefficients::{CoefficientTables, TableConfig};
use isingtri::constants::{mu, nu_c};
use isingtri::peeling::{PeelingLaw, Regime};
use isingtri::scaling::{
    drift_experiment, hitting_time_experiment, hull_experiment, interface_experiment, stable_selfsimilarity_test,
    ScalingReport,
};

fn critical() -> &'static CoefficientTables {
    static T: OnceLock<CoefficientTables> = OnceLock::new();
    T.get_or_init(|| CoefficientTables::build(&TableConfig::small(nu_c(), true)).unwrap())
}

fn high_temperature() -> &'static CoefficientTables {
    static T: OnceLock<CoefficientTables> = OnceLock::new();
    T.get_or_init(|| CoefficientTables::build(&TableConfig::small(1.2, false)).unwrap())
}

fn same(a: &ScalingReport, b: &ScalingReport) {
    assert_eq!(serde_json::to_string(a).unwrap(), serde_json::to_string(b).unwrap());
}

#[test]
fn reports_regenerate_bit_identically() {
    let law = PeelingLaw::new(critical()).unwrap();
    let h = || hitting_time_experiment(&law, Regime::HalfPlane, 40, 0, &[2, 5], 400, 3, 10_000_000, 0.1).unwrap();
    let (a, b) = (h(), h());
    assert_eq!(a.len(), 2);
    for (x, y) in a.iter().zip(&b) {
        same(x, y);
    }
    let other = hitting_time_experiment(&law, Regime::HalfPlane, 40, 0, &[2, 5], 400, 4, 10_000_000, 0.1).unwrap();
    assert_ne!(a[0].ks, other[0].ks);

    let s = || stable_selfsimilarity_test(&law, 100, 400, 300, 0.75, mu(), 5, 0.1).unwrap();
    same(&s(), &s());
    let d = || drift_experiment(&law, 100_000, 6, mu(), 3.0).unwrap();
    same(&d(), &d());

    let ht = PeelingLaw::new(high_temperature()).unwrap();
    let hull = || hull_experiment(&ht, 300, 7, 1_000_000, 10.0, 1000.0, -0.5, 0.2).unwrap();
    same(&hull(), &hull());
}

#[test]
fn interface_outlasts_hitting_time() {
    let law = PeelingLaw::new(critical()).unwrap();
    let (report, traces) = interface_experiment(&law, Regime::HalfPlane, 30, 0, 300, 8, 10_000_000, 0.1).unwrap();
    assert_eq!(traces.len(), 300);
    let mut checked = 0;
    for tr in &traces {
        if let (Some(eta), Some(&t0)) = (tr.eta, tr.hitting.get(&0)) {
            assert!(eta >= t0, "stream {}: η {eta} < T_0 {t0}", tr.stream);
            checked += 1;
        }
    }
    assert!(checked >= 250, "{checked} runs with both η and T_0");
    assert!(report.ks.unwrap() <= 1.0);
    assert!(report.cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
}

#[test]
fn csv_lists_the_cdf() {
    let law = PeelingLaw::new(critical()).unwrap();
    let r = hitting_time_experiment(&law, Regime::HalfPlane, 20, 0, &[0], 200, 9, 10_000_000, 0.2).unwrap();
    let csv = r[0].csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,F"));
    assert_eq!(lines.count(), r[0].cdf.len());
}
