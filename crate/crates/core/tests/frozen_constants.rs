//! The shipped constants reproduce from their calibration sweeps and hold on
//! the disjoint validation sweeps.

use losnet_core::constants::{calibrate, Constants};
use losnet_core::oscillatory::{k10_ratios, k7_ratios, k8_ratios, k9_ratios, s_decomposition, sweeps};

#[test]
fn calibration_reproduces_shipped_file() {
    let shipped = Constants::shipped();
    let fresh = calibrate().unwrap().constants;
    assert_eq!(fresh, shipped);
}

#[test]
fn lower_constants_hold_on_validation() {
    let c = Constants::shipped();
    let k7_min = k7_ratios(&sweeps::K7_VALIDATION).into_iter().fold(f64::INFINITY, f64::min);
    assert!(k7_min >= c.k7, "k7 validation min {k7_min} < {}", c.k7);
    let k9_min = k9_ratios(&sweeps::K9_VALIDATION).into_iter().fold(f64::INFINITY, f64::min);
    assert!(k9_min >= c.k9, "k9 validation min {k9_min} < {}", c.k9);
}

#[test]
fn upper_constants_hold_on_validation() {
    let c = Constants::shipped();
    let k8_max = k8_ratios(&sweeps::K8_VALIDATION).unwrap().into_iter().fold(0.0, f64::max);
    assert!(k8_max <= c.k8, "k8 validation max {k8_max} > {}", c.k8);
    let k10_max = k10_ratios(&sweeps::K10_VALIDATION).unwrap().into_iter().fold(0.0, f64::max);
    assert!(k10_max <= c.k10, "k10 validation max {k10_max} > {}", c.k10);
}

#[test]
fn decomposition_reassembles_the_correlation_bound() {
    let c = Constants::shipped();
    // sqrt(A_c) <= d <= A_c^{3/4}, eps3 = eta = d / A_c.
    for (a_c, d) in [(400.0, 30.0), (900.0, 100.0)] {
        let eps = d / a_c;
        let dec = s_decomposition(a_c, d, 2000, 3, eps).unwrap();
        let log = (1.0 / eps).ln();
        assert!(dec.u1 <= c.k8 * (d / a_c) * log + 3.0 * dec.u1_se, "U1 {dec:?}");
        assert!(dec.u2 <= 2.0 * eps + 3.0 * dec.u2_se, "U2 {dec:?}");
        assert!(dec.u3 <= 2.0 * eps + c.k10 * (d / a_c) * log + 3.0 * dec.u3_se, "U3 {dec:?}");
        let mc = losnet_core::dof::estimate_s_monte_carlo(a_c, d, 400_000, 4).unwrap();
        let joint = (mc.std_error.powi(2) + dec.u1_se.powi(2) + dec.u2_se.powi(2) + dec.u3_se.powi(2)).sqrt();
        assert!((dec.total() - mc.value).abs() <= 4.0 * joint, "{} vs {}", dec.total(), mc.value);
    }
}
