mod common;

use common::integrate;
use proptest::prelude::*;
use upc_core::analysis::{
    de_sir_cdf, de_sir_pdf, mmse_sir_variance_c, monte_carlo_p_delta, p_delta_de, p_delta_mmse, DeltaBand,
    EmpiricalCdf, MonteCarloSetup,
};
use upc_core::finite::RngSpec;
use upc_core::{ReceiverKind, Scenario};

const GAMMA: f64 = 6.4;
const SHAPES: [(usize, usize); 3] = [(16, 4), (64, 48), (256, 192)];

fn support(n: usize, k: usize) -> f64 {
    GAMMA / (1.0 - k as f64 / n as f64)
}

#[test]
fn decorrelator_density_is_normalised() {
    for (n, k) in SHAPES {
        let top = support(n, k);
        let total = integrate(&|z| de_sir_pdf(z, n, k, GAMMA).unwrap(), 0.0, top, 400, 1e-13);
        assert!((total - 1.0).abs() < 1e-8, "N={n} K={k}: {total}");
    }
}

#[test]
fn band_probability_is_the_density_integral() {
    for (n, k) in SHAPES {
        let band = DeltaBand::new(GAMMA, 1.0).unwrap();
        let hi = band.gamma_high.min(support(n, k));
        let want = integrate(
            &|z| de_sir_pdf(z, n, k, GAMMA).unwrap(),
            band.gamma_low,
            hi,
            400,
            1e-13,
        );
        let got = p_delta_de(n, k, GAMMA, 1.0).unwrap();
        assert!((got - want).abs() < 1e-8, "N={n} K={k}: {got} vs {want}");
    }
}

#[test]
fn density_mode_and_support() {
    // (N − K) / (N − 2) of the way up the support.
    let mode = 8.533_333_333_333_333 * 24.0 / 30.0;
    let f = |z: f64| de_sir_pdf(z, 32, 8, GAMMA).unwrap();
    assert!(f(mode) > f(mode - 1e-3) && f(mode) > f(mode + 1e-3));
    assert_eq!(f(8.6), 0.0);
    assert_eq!(f(-1.0), 0.0);
    assert_eq!(de_sir_cdf(9.0, 32, 8, GAMMA).unwrap(), 1.0);
}

#[test]
fn approximations_sharpen_with_processing_gain() {
    for alpha in [0.25, 0.75] {
        let mut prev_de = 0.0;
        let mut prev_mmse = 0.0;
        for n in [16usize, 64, 256] {
            let k = (alpha * n as f64) as usize;
            let de = p_delta_de(n, k, GAMMA, 1.0).unwrap();
            let mmse = p_delta_mmse(n, alpha, GAMMA, 1.0).unwrap();
            assert!(de >= prev_de && mmse > prev_mmse);
            prev_de = de;
            prev_mmse = mmse;
        }
    }
    assert!((p_delta_mmse(1 << 30, 0.25, GAMMA, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((p_delta_de(256, 64, GAMMA, 60.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn variance_constant_closed_forms() {
    assert!((mmse_sir_variance_c(GAMMA, 0.0).unwrap() - 81.92).abs() < 1e-12);
    let r = GAMMA / (1.0 + GAMMA);
    for alpha in [0.25, 0.75] {
        let want = 2.0 * GAMMA * GAMMA / (1.0 - alpha * r * r);
        assert!((mmse_sir_variance_c(GAMMA, alpha).unwrap() - want).abs() < 1e-12);
    }
    assert!((mmse_sir_variance_c(GAMMA, 0.25).unwrap() - 100.76).abs() < 0.01);
}

#[test]
fn monte_carlo_is_reproducible() {
    let scenario = Scenario::normalized(12, 16, GAMMA, ReceiverKind::Mmse).unwrap();
    let spec = RngSpec::new(42, 3);
    let a = monte_carlo_p_delta(&scenario, 1.0, 2000, spec).unwrap();
    let b = monte_carlo_p_delta(&scenario, 1.0, 2000, spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trials, 2000);
    assert!((a.std_error - (a.estimate * (1.0 - a.estimate) / 2000.0).sqrt()).abs() < 1e-15);
    let wide = monte_carlo_p_delta(&scenario, 100.0, 500, spec).unwrap();
    assert_eq!(wide.estimate, 1.0);
}

#[test]
fn split_ranges_add_up() {
    let scenario = Scenario::normalized(4, 16, GAMMA, ReceiverKind::De).unwrap();
    let setup = MonteCarloSetup::new(&scenario, 1.0).unwrap();
    let spec = RngSpec::new(5, 0);
    let whole = setup.count_in_band(&spec, 0..900).unwrap();
    let parts = setup.count_in_band(&spec, 600..900).unwrap() + setup.count_in_band(&spec, 0..600).unwrap();
    assert_eq!(whole, parts);
}

#[test]
fn mmse_empirical_cdf_at_target() {
    // Binary chips put the median a little above the target; the frozen
    // value comes from an independent dense-solve simulation.
    let scenario = Scenario::normalized(64, 256, GAMMA, ReceiverKind::Mmse).unwrap();
    let setup = MonteCarloSetup::new(&scenario, 1.0).unwrap();
    let (samples, rejected) = setup.sample_range(&RngSpec::new(1, 1), 0..20_000).unwrap();
    assert_eq!(rejected, 0);
    let cdf = EmpiricalCdf::new(samples).unwrap();
    let at = cdf.eval(GAMMA);
    assert!((at - 0.448).abs() < 0.02, "F(γ*) = {at}");
}

proptest! {
    #[test]
    fn band_probabilities_grow_with_delta(
        d1 in 0.01f64..10.0, d2 in 0.01f64..10.0, shape in 0usize..3, alpha in 0.05f64..0.9,
    ) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (n, k) = SHAPES[shape];
        let a = p_delta_de(n, k, GAMMA, lo).unwrap();
        let b = p_delta_de(n, k, GAMMA, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
        let a = p_delta_mmse(n, alpha, GAMMA, lo).unwrap();
        let b = p_delta_mmse(n, alpha, GAMMA, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
    }

    #[test]
    fn empirical_cdf_is_a_distribution(samples in proptest::collection::vec(-50.0f64..50.0, 1..200), x in -60.0f64..60.0) {
        let cdf = EmpiricalCdf::new(samples.clone()).unwrap();
        let below = samples.iter().filter(|s| **s <= x).count() as f64 / samples.len() as f64;
        prop_assert_eq!(cdf.eval(x), below);
        prop_assert_eq!(cdf.eval(-1e9), 0.0);
        prop_assert_eq!(cdf.eval(1e9), 1.0);
    }
}
