mod common;

use common::{relative_difference, repeated_rates, rv, spread_rates};
use expstat::convolution::{
    char_fn_linear_combination, char_fn_product, conv_coefficients, conv_mixture, conv_pdf,
    gamma2_pdf, gamma_limit_error, ordering_probability, partial_fraction_identity_check,
    EvaluationPath, SWITCH_THRESHOLD,
};
use expstat::oracle::{integrate, two_rate_convolution_pdf, IteratedConvolution};
use expstat::{Hypoexponential, RateVector, RngStream};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_phase_type_and_quadrature_agree(
        rates in spread_rates(2..=6, -2.0, 2.0, 1e-3)
    ) {
        let law = Hypoexponential::new(rv(&rates));
        let zs: Vec<f64> = (0..20)
            .map(|i| law.quantile(0.05 + 0.9 * i as f64 / 19.0).unwrap())
            .collect();
        let quad = IteratedConvolution::new(&rates, zs[19]).unwrap();
        let coeffs = conv_coefficients(&rv(&rates)).unwrap();
        for &z in &zs {
            let a = coeffs.closed_form_pdf(z).unwrap();
            let b = law.phase_type().pdf(z).unwrap();
            let c = quad.pdf(z).unwrap();
            prop_assert!(relative_difference(a, b) <= 1e-7, "z={} {} {}", z, a, b);
            prop_assert!(relative_difference(a, c) <= 1e-7, "z={} {} {}", z, a, c);
            prop_assert!(relative_difference(b, c) <= 1e-7, "z={} {} {}", z, b, c);
        }
    }

    #[test]
    fn coefficient_identities_hold(rates in spread_rates(1..=10, -2.0, 2.0, 1e-3)) {
        let rates = rv(&rates);
        for check in conv_coefficients(&rates).unwrap().power_sum_checks() {
            prop_assert!(check.passed(), "{:?}", check);
        }
        for probe in [0.5 * rates.min_rate(), 2.0 * rates.max_rate()] {
            let res = partial_fraction_identity_check(&rates, probe).unwrap();
            prop_assert!(res.passed(), "{:?}", res);
        }
    }

    #[test]
    fn transforms_agree(rates in spread_rates(1..=8, -1.0, 1.0, 1e-2), seed in any::<u64>()) {
        let rates = rv(&rates);
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..100 {
            let t = (rng.uniform() - 0.5) * 200.0;
            let lhs = char_fn_product(&rates, t).unwrap().value;
            let rhs = char_fn_linear_combination(&rates, t).unwrap().value;
            prop_assert!((lhs - rhs).norm() <= 1e-12, "t={}: {} vs {}", t, lhs, rhs);
        }
    }

    #[test]
    fn clustered_mixtures_normalize(rates in repeated_rates(1..=8)) {
        let m = conv_mixture(&rv(&rates)).unwrap();
        prop_assert!((m.integral() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn sum_is_a_scale_family(
        rates in spread_rates(1..=6, -1.0, 1.0, 1e-2),
        z in 0.01..5.0f64,
    ) {
        let base = rv(&rates);
        let f = conv_pdf(&base, z).unwrap();
        for c in [0.1, 10.0] {
            let scaled = base.scaled(c).unwrap();
            let g = conv_pdf(&scaled, z / c).unwrap() / c;
            prop_assert!(relative_difference(f, g) <= 1e-12, "c={}: {} vs {}", c, f, g);
        }
    }
}

#[test]
fn two_rate_density_matches_convolution_integral() {
    let f = conv_pdf(&rv(&[1.0, 2.0]), std::f64::consts::LN_2).unwrap();
    assert!((f - 0.5).abs() < 1e-15);
    for &z in &[0.1, 0.7, 3.0, 12.0] {
        let exact = conv_pdf(&rv(&[1.0, 2.0]), z).unwrap();
        let quad = two_rate_convolution_pdf(1.0, 2.0, z).unwrap();
        assert!(relative_difference(exact, quad) < 1e-12, "z={z}");
    }
}

#[test]
fn no_jump_across_the_switch_threshold() {
    // relative gaps are measured against the larger rate
    let below = 1.0 / (1.0 - SWITCH_THRESHOLD * (1.0 - 1e-9));
    let above = 1.0 / (1.0 - SWITCH_THRESHOLD * (1.0 + 1e-9));
    let lo = Hypoexponential::new(rv(&[1.0, below]));
    let hi = Hypoexponential::new(rv(&[1.0, above]));
    assert_eq!(lo.path(), EvaluationPath::PhaseType);
    assert_eq!(hi.path(), EvaluationPath::ClosedForm);
    assert!((lo.pdf(1.0).unwrap() - hi.pdf(1.0).unwrap()).abs() < 1e-8);

    // a fine sweep through the threshold moves the density smoothly
    let mut previous: Option<f64> = None;
    for i in -50..=50 {
        let g = SWITCH_THRESHOLD * (1.0 + 1e-9 * i as f64);
        let f = conv_pdf(&rv(&[1.0, 1.0 / (1.0 - g)]), 1.0).unwrap();
        if let Some(p) = previous {
            assert!((f - p).abs() < 1e-8, "g={g}: {p} -> {f}");
        }
        previous = Some(f);
    }
}

#[test]
fn gamma_limit_is_second_order_and_exact_at_zero() {
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
    let e2 = gamma_limit_error(1.0, 1e-2, &grid).unwrap();
    let e3 = gamma_limit_error(1.0, 1e-3, &grid).unwrap();
    assert!(e2 > 0.0 && e2 < 1e-3);
    assert!((95.0..=105.0).contains(&(e2 / e3)), "ratio {}", e2 / e3);
    assert_eq!(gamma_limit_error(1.0, 0.0, &grid).unwrap(), 0.0);
}

#[test]
fn erlang_block_matches_quadrature() {
    // two equal rates form one block; the integral ∫_0^z λe^{−λx}λe^{−λ(z−x)}dx is Γ(2, λ)
    let law = Hypoexponential::new(rv(&[1.3, 1.3]));
    for &z in &[0.2, 1.0, 4.0] {
        let quad = integrate(
            |x| 1.3 * (-1.3 * x).exp() * 1.3 * (-1.3 * (z - x)).exp(),
            0.0,
            z,
            0.0,
            1e-14,
        )
        .unwrap()
        .value;
        let f = law.pdf(z).unwrap();
        assert!(relative_difference(f, quad) < 1e-9, "z={z}");
        assert!(relative_difference(f, gamma2_pdf(1.3, z)) < 1e-14, "z={z}");
    }
}

#[test]
fn three_rate_coefficients() {
    let c = conv_coefficients(&rv(&[1.0, 2.0, 3.0])).unwrap();
    let want = [3.0, -3.0, 1.0];
    for (a, w) in c.coefficients().iter().zip(want) {
        assert!((a - w).abs() < 1e-14);
    }
}

#[test]
fn ordering_probability_matches_simulation() {
    assert!((ordering_probability(1.0, 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
    let mut rng = RngStream::new(2024, 0);
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| rng.exponential(1.0) < rng.exponential(2.0))
        .count();
    let p = hits as f64 / n as f64;
    let band = 4.0 * (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
    assert!((p - 1.0 / 3.0).abs() < band, "{p}");
}

#[test]
fn distinct_rates_are_required_for_plain_coefficients() {
    let repeated = RateVector::new(vec![1.0, 1.0, 2.0]).unwrap();
    assert!(conv_coefficients(&repeated).is_err());
    assert!(conv_mixture(&repeated).is_ok());
}
