use mcs_qkd::fock_oracle::{p0_via_fock, p0_via_quadrature, DEFAULT_ORACLE_N_MAX};
use mcs_qkd::key_rate::{
    adjusted_signal, channel_eta, error_rate, secure_rate, shannon_h, tau_compression,
    ChannelModel, DetectorModel, FPolicy, SignConvention,
};
use mcs_qkd::photon_source::{
    coeff_closed_form, fock_coefficients, make_state, mcs_state, p_multi, p_signal, Protocol,
    DEFAULT_N_CAP,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fock_expansion_is_normalized(alpha in 0.0..=2.0f64, nu in 0.0..=1.0f64) {
        let s = make_state(alpha, nu).unwrap();
        let d = fock_coefficients(&s, 1e-14, DEFAULT_N_CAP).unwrap();
        let mass = d.total_mass();
        prop_assert!((1.0 - 1e-8..=1.0 + 1e-9).contains(&mass), "mass {}", mass);
        prop_assert!(mass >= 1.0 - d.tail_bound() - 1e-9);
        prop_assert!(d.tail_bound() <= 1e-14);
    }

    #[test]
    fn closed_forms_agree_with_recurrence(alpha in 0.0..=2.0f64, nu in 0.0..=1.0f64) {
        let s = make_state(alpha, nu).unwrap();
        let d = fock_coefficients(&s, 1e-14, DEFAULT_N_CAP).unwrap();
        for n in 0..=4 {
            let closed = coeff_closed_form(&s, n).unwrap();
            prop_assert!((closed - d.amplitude(n)).abs() < 1e-10, "n={} {} vs {}", n, closed, d.amplitude(n));
        }
    }

    #[test]
    fn interference_cancels_first_insecure_term(nu in 0.0..=1.0f64) {
        let bb = fock_coefficients(&mcs_state(nu, Protocol::Bb84).unwrap(), 1e-14, DEFAULT_N_CAP).unwrap();
        let sarg = fock_coefficients(&mcs_state(nu, Protocol::Sarg04).unwrap(), 1e-14, DEFAULT_N_CAP).unwrap();
        prop_assert!(bb.amplitude(2).abs() < 1e-11);
        prop_assert!(sarg.amplitude(3).abs() < 1e-11);
    }

    #[test]
    fn signal_increases_with_efficiency(
        alpha in 0.01..=2.0f64,
        nu in 0.0..=1.0f64,
        eta in 0.0..0.99f64,
        step in 1e-3..0.5f64,
    ) {
        let s = make_state(alpha, nu).unwrap();
        let hi = (eta + step).min(1.0);
        prop_assert!(p_signal(&s, hi).unwrap() > p_signal(&s, eta).unwrap());
    }

    #[test]
    fn fock_oracle_monotone(
        alpha in 0.0..=2.0f64,
        d_alpha in 0.0..=0.5f64,
        nu in 0.0..=1.0f64,
        eta in 0.0..=1.0f64,
        d_eta in 0.0..=0.3f64,
    ) {
        let s = make_state(alpha, nu).unwrap();
        let base = p0_via_fock(&s, eta, DEFAULT_ORACLE_N_MAX).unwrap();
        let more_eta = p0_via_fock(&s, (eta + d_eta).min(1.0), DEFAULT_ORACLE_N_MAX).unwrap();
        let s2 = make_state(alpha + d_alpha, nu).unwrap();
        let more_alpha = p0_via_fock(&s2, eta, DEFAULT_ORACLE_N_MAX).unwrap();
        prop_assert!(more_eta <= base + 1e-15);
        prop_assert!(more_alpha <= base + 1e-15);
    }

    #[test]
    fn fock_and_quadrature_oracles_agree(
        alpha in 0.0..=2.0f64,
        nu in 0.0..=1.0f64,
        eta in 0.01..0.99f64,
    ) {
        let s = make_state(alpha, nu).unwrap();
        let f = p0_via_fock(&s, eta, DEFAULT_ORACLE_N_MAX).unwrap();
        let q = p0_via_quadrature(&s, eta, 96).unwrap();
        prop_assert!((f - q).abs() < 1e-6);
    }

    #[test]
    fn entropy_is_symmetric(e in 0.0..=1.0f64) {
        prop_assert!((shannon_h(e) - shannon_h(1.0 - e)).abs() < 1e-14);
    }

    #[test]
    fn compression_nondecreasing(rho in 0.01..=1.0f64, a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (e1, e2) = (lo * rho / 2.0, hi * rho / 2.0);
        prop_assert!(tau_compression(e1, rho) <= tau_compression(e2, rho) + 1e-15);
        prop_assert_eq!(tau_compression(0.0, rho), 0.0);
    }

    #[test]
    fn error_rate_diluted_by_signal(
        pd in 1e-7..1e-2f64,
        c in 0.0..=0.02f64,
        p1 in 0.0..=1.0f64,
        p2 in 0.0..=1.0f64,
    ) {
        let det = DetectorModel::new(pd, c).unwrap();
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(error_rate(hi, &det).unwrap() <= error_rate(lo, &det).unwrap() + 1e-15);
    }

    #[test]
    fn no_single_photon_surplus_means_no_key(
        p_s in 0.0..=1.0f64,
        excess in 0.0..=1.0f64,
        pd in 0.0..1e-2f64,
        c in 0.0..=0.02f64,
    ) {
        let det = DetectorModel::new(pd, c).unwrap();
        let bar = adjusted_signal(p_s, &det);
        let p_m = (bar + excess * (1.0 - bar)).min(1.0);
        let r = secure_rate(p_s, p_m, &det, &FPolicy::default(), SignConvention::Corrected).unwrap();
        prop_assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn ideal_limit_rate_is_half_signal(p_s in 1e-4..=1.0f64, p_m in 0.0..1e-9f64) {
        let det = DetectorModel::new(0.0, 0.0).unwrap();
        let r = secure_rate(p_s, p_m, &det, &FPolicy::Constant(1.0), SignConvention::Corrected).unwrap();
        prop_assert!((r.rate - p_s / 2.0).abs() < 1e-8);
        prop_assert!(r.p_s <= r.p_s_bar && r.p_s_bar <= 1.0);
        prop_assert!(r.rho <= 1.0 && (0.0..=0.5).contains(&r.e));
    }

    #[test]
    fn channel_eta_strictly_decreasing(l in 0.0..200.0f64, dl in 1e-3..50.0f64) {
        let a = ChannelModel::reference(l).unwrap();
        let b = ChannelModel::reference(l + dl).unwrap();
        prop_assert!(channel_eta(&b) < channel_eta(&a));
    }
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        )
        .0
}

#[test]
fn bb84_condition_is_global_minimum() {
    let steps = 3000;
    let step = 3.0 / steps as f64;
    for &nu in &[0.05, 0.1, 0.3, 0.5, 0.8, 1.0] {
        let values: Vec<f64> = (0..=steps)
            .map(|i| p_multi(&make_state(i as f64 * step, nu).unwrap(), Protocol::Bb84))
            .collect();
        let best = argmin(&values) as f64 * step;
        let expected = mcs_state(nu, Protocol::Bb84).unwrap().alpha();
        assert!(
            (best - expected).abs() <= step,
            "nu={nu}: {best} vs {expected}"
        );
    }
}

// alpha^2 = 3 mu nu is a local minimum of the three-or-more photon
// probability; squeezed vacuum (alpha = 0) sits lower still.
#[test]
fn sarg04_condition_is_local_minimum_only() {
    let step = 1e-3;
    for &nu in &[0.05, 0.1, 0.3, 0.5, 0.8, 1.0] {
        let s = mcs_state(nu, Protocol::Sarg04).unwrap();
        let at = |a: f64| p_multi(&make_state(a, nu).unwrap(), Protocol::Sarg04);
        let window: Vec<f64> = (-50..=50)
            .map(|k| at(s.alpha() + k as f64 * step))
            .collect();
        assert_eq!(argmin(&window), 50, "nu={nu}");
        assert!(at(0.0) < at(s.alpha()), "nu={nu}");
    }
}
