//! Large-system multiuser efficiency.
//!
//! In the large-system limit the output SIR of every user is its received
//! SNR scaled by a common factor, `γ_k = η Γ_k`. The factor depends on the
//! detector and on the SNR distribution only; here that distribution is the
//! empirical one given by an [`SnrProfile`].

use alloc::format;
use core::fmt;

use crate::quadrature::GaussLegendre;
use crate::scenario::{ReceiverKind, SnrProfile};
use crate::solver::{bisect, damped_fixed_point};
use crate::{Error, Result};

pub use crate::solver::FixedPointSettings;

/// Damping used by the individually-optimal fixed-point iteration.
pub const IO_DAMPING: f64 = 0.5;

/// Multiuser efficiency `η ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Efficiency(f64);

impl Efficiency {
    pub fn new(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta <= 1.0 {
            Ok(Efficiency(eta))
        } else {
            Err(Error::invalid(format!(
                "efficiency must lie in (0, 1], got {eta}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Efficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_inputs(profile: &SnrProfile, alpha: f64) -> Result<()> {
    if profile.is_empty() {
        return Err(Error::invalid("SNR profile is empty"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "load must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

/// Matched filter: `η = 1 / (1 + α E{Γ})`.
pub fn efficiency_mf(profile: &SnrProfile, alpha: f64) -> Result<Efficiency> {
    check_inputs(profile, alpha)?;
    Efficiency::new(1.0 / (1.0 + alpha * profile.mean()))
}

/// Decorrelator: `η = 1 − α`, defined for `α < 1`.
pub fn efficiency_de(alpha: f64) -> Result<Efficiency> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("load must be nonnegative, got {alpha}")));
    }
    if alpha >= 1.0 {
        return Err(Error::InfeasibleLoad {
            receiver: ReceiverKind::De,
            alpha,
            gamma_star: f64::NAN,
        });
    }
    Efficiency::new(1.0 - alpha)
}

/// `η + α E{ηΓ / (1 + ηΓ)} − 1`; strictly increasing in `η`.
pub fn mmse_residual(eta: f64, profile: &SnrProfile, alpha: f64) -> f64 {
    let snr = profile.as_slice();
    let mean = snr.iter().map(|g| eta * g / (1.0 + eta * g)).sum::<f64>() / snr.len() as f64;
    eta + alpha * mean - 1.0
}

/// Linear MMSE: unique root of [`mmse_residual`] in `(0, 1]`, by bisection.
pub fn efficiency_mmse(
    profile: &SnrProfile,
    alpha: f64,
    settings: &FixedPointSettings,
) -> Result<Efficiency> {
    check_inputs(profile, alpha)?;
    settings.validate()?;
    // residual(0) = −1 and residual(1) ≥ 0, so the root is bracketed.
    let eta = bisect(|eta| mmse_residual(eta, profile, alpha), 0.0, 1.0, settings)?;
    Efficiency::new(eta)
}

/// Width of the `sech²` factor's tails that still matter.
const SECH2_SUPPORT: f64 = 40.0;
/// Gaussian tail cut-off, in standard deviations.
const GAUSS_SUPPORT: f64 = 12.0;

/// MMSE of a binary input observed in Gaussian noise at SNR `s`,
/// `1 − E{tanh(s − Z√s)}`.
///
/// Evaluated as `E{sech²(s + √s Z)}` (for binary inputs `E tanh = E tanh²`),
/// written as an integral over the post-detection variable `y`:
/// `∫ sech²(y) φ((y − s)/√s)/√s dy`. Both factors are smooth on a scale of
/// `min(1, √s)`, which sets the panel width of the composite rule.
pub fn bpsk_mmse(snr: f64, rule: &GaussLegendre) -> f64 {
    if snr <= 0.0 {
        return 1.0;
    }
    let sd = libm::sqrt(snr);
    let lo = (snr - GAUSS_SUPPORT * sd).max(-SECH2_SUPPORT);
    let hi = (snr + GAUSS_SUPPORT * sd).min(SECH2_SUPPORT);
    if lo >= hi {
        return 0.0;
    }
    let panels = libm::ceil((hi - lo) / sd.min(1.0)) as usize;
    let norm = 1.0 / (sd * libm::sqrt(2.0 * core::f64::consts::PI));
    let value = rule.integrate(lo, hi, panels, |y| {
        let e = libm::exp(-2.0 * y.abs());
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        let u = (y - snr) / sd;
        sech2 * norm * libm::exp(-0.5 * u * u)
    });
    value.clamp(0.0, 1.0)
}

/// Right-hand side of the individually optimal fixed point,
/// `1 / (1 + α E{Γ · mmse(ηΓ)})`.
pub fn io_map(eta: f64, profile: &SnrProfile, alpha: f64, rule: &GaussLegendre) -> f64 {
    let snr = profile.as_slice();
    let mean = snr.iter().map(|g| g * bpsk_mmse(eta * g, rule)).sum::<f64>() / snr.len() as f64;
    1.0 / (1.0 + alpha * mean)
}

/// Individually optimal detector with binary inputs.
///
/// Damped fixed-point iteration from `η = 1`; the Gaussian integral uses
/// [`bpsk_mmse`]. When the equation has several
/// solutions the one reached from `η = 1` is returned.
pub fn efficiency_io(profile: &SnrProfile, alpha: f64, settings: &FixedPointSettings) -> Result<Efficiency> {
    settings.validate()?;
    let rule = GaussLegendre::new(settings.quadrature_nodes)?;
    efficiency_io_with_rule(profile, alpha, settings, &rule)
}

/// [`efficiency_io`] with a caller-supplied quadrature rule.
pub fn efficiency_io_with_rule(
    profile: &SnrProfile,
    alpha: f64,
    settings: &FixedPointSettings,
    rule: &GaussLegendre,
) -> Result<Efficiency> {
    check_inputs(profile, alpha)?;
    let eta = damped_fixed_point(|eta| io_map(eta, profile, alpha, rule), 1.0, IO_DAMPING, settings)?;
    Efficiency::new(eta.min(1.0))
}

/// Equal-power MMSE closed form.
///
/// With a common target `γ*` the steady-state SNR is
/// `Γ* = γ* / (1 − α γ* / (1 + γ*))`; returns `(η, Γ*)` with `η Γ* = γ*`.
/// Requires `α < 1 + 1/γ*`.
pub fn efficiency_mmse_equal_power(gamma_star: f64, alpha: f64) -> Result<(Efficiency, f64)> {
    if !(gamma_star > 0.0) || !gamma_star.is_finite() {
        return Err(Error::invalid(format!(
            "target SIR must be positive, got {gamma_star}"
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("load must be nonnegative, got {alpha}")));
    }
    if alpha >= 1.0 + 1.0 / gamma_star {
        return Err(Error::InfeasibleLoad {
            receiver: ReceiverKind::Mmse,
            alpha,
            gamma_star,
        });
    }
    let snr = gamma_star / (1.0 - alpha * gamma_star / (1.0 + gamma_star));
    let half_inv = 0.5 / snr;
    let half_free = 0.5 * (1.0 - alpha);
    let eta = half_free - half_inv
        + libm::sqrt(half_free * half_free + (1.0 + alpha) * half_inv + half_inv * half_inv);
    Ok((Efficiency::new(eta.min(1.0))?, snr))
}

/// Efficiency evaluator that keeps the quadrature rule between calls.
#[derive(Debug, Clone)]
pub struct EfficiencySolver {
    settings: FixedPointSettings,
    rule: Option<GaussLegendre>,
}

impl EfficiencySolver {
    pub fn new(settings: FixedPointSettings) -> Result<Self> {
        settings.validate()?;
        Ok(EfficiencySolver { settings, rule: None })
    }

    pub fn settings(&self) -> &FixedPointSettings {
        &self.settings
    }

    pub fn efficiency(
        &mut self,
        receiver: ReceiverKind,
        profile: &SnrProfile,
        alpha: f64,
    ) -> Result<Efficiency> {
        match receiver {
            ReceiverKind::Mf => efficiency_mf(profile, alpha),
            ReceiverKind::De => {
                check_inputs(profile, alpha)?;
                efficiency_de(alpha)
            }
            ReceiverKind::Mmse => efficiency_mmse(profile, alpha, &self.settings),
            ReceiverKind::Io => {
                if self.rule.is_none() {
                    self.rule = Some(GaussLegendre::new(self.settings.quadrature_nodes)?);
                }
                let rule = self.rule.as_ref().expect("rule initialised above");
                efficiency_io_with_rule(profile, alpha, &self.settings, rule)
            }
        }
    }
}

/// One-shot dispatch on the receiver kind.
pub fn efficiency(
    receiver: ReceiverKind,
    profile: &SnrProfile,
    alpha: f64,
    settings: &FixedPointSettings,
) -> Result<Efficiency> {
    EfficiencySolver::new(*settings)?.efficiency(receiver, profile, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn point(g: f64, k: usize) -> SnrProfile {
        SnrProfile::point_mass(g, k).unwrap()
    }

    #[test]
    fn matched_filter() {
        let eta = efficiency_mf(&point(8.0, 8), 0.25).unwrap().value();
        assert!((eta - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(efficiency_mf(&point(123.0, 3), 0.0).unwrap().value(), 1.0);
        assert_eq!(efficiency_mf(&SnrProfile::zeros(4), 0.75).unwrap().value(), 1.0);
        assert!(efficiency_mf(&SnrProfile::zeros(0), 0.5).is_err());
    }

    #[test]
    fn decorrelator() {
        assert_eq!(efficiency_de(0.25).unwrap().value(), 0.75);
        assert_eq!(efficiency_de(0.0).unwrap().value(), 1.0);
        assert!(matches!(efficiency_de(1.0), Err(Error::InfeasibleLoad { .. })));
    }

    #[test]
    fn equal_power_closed_form() {
        let (eta, snr) = efficiency_mmse_equal_power(6.4, 0.75).unwrap();
        assert!((eta.value() - 0.35135135135135).abs() < 1e-12);
        assert!((snr - 18.215384615384618).abs() < 1e-12);
        assert!((eta.value() * snr - 6.4).abs() < 1e-12);

        let (eta, snr) = efficiency_mmse_equal_power(6.4, 0.0).unwrap();
        assert!((eta.value() - 1.0).abs() < 1e-15);
        assert!((snr - 6.4).abs() < 1e-15);

        let (eta, snr) = efficiency_mmse_equal_power(6.4, 0.25).unwrap();
        assert!((eta.value() - 0.7837837837837838).abs() < 1e-12);
        assert!((snr - 8.16551724137931).abs() < 1e-12);

        assert!(efficiency_mmse_equal_power(6.4, 1.0 + 1.0 / 6.4).is_err());
    }

    #[test]
    fn mmse_matches_closed_form() {
        let s = FixedPointSettings::default();
        for (alpha, want) in [(0.25, 0.7837837837837838), (0.75, 0.3513513513513513)] {
            let (_, snr) = efficiency_mmse_equal_power(6.4, alpha).unwrap();
            let profile = point(snr, 8);
            let eta = efficiency_mmse(&profile, alpha, &s).unwrap().value();
            assert!((eta - want).abs() < 1e-11);
            assert!(mmse_residual(eta, &profile, alpha).abs() < s.tolerance);
        }
        assert_eq!(efficiency_mmse(&point(5.0, 3), 0.0, &s).unwrap().value(), 1.0);
    }

    #[test]
    fn io_trivial_limits() {
        let s = FixedPointSettings::default();
        assert_eq!(
            efficiency_io(&SnrProfile::zeros(5), 0.8, &s).unwrap().value(),
            1.0
        );
        assert_eq!(efficiency_io(&point(7.0, 5), 0.0, &s).unwrap().value(), 1.0);
    }

    #[test]
    fn io_residual_is_small() {
        let s = FixedPointSettings::default();
        let rule = GaussLegendre::new(s.quadrature_nodes).unwrap();
        let profile = SnrProfile::new([1.0, 4.0, 10.0, 30.0].to_vec()).unwrap();
        let eta = efficiency_io(&profile, 0.7, &s).unwrap().value();
        assert!((eta - io_map(eta, &profile, 0.7, &rule)).abs() < 1e-12);
    }

    #[test]
    fn bpsk_mmse_reference_values() {
        // Values from an independent adaptive quadrature of 1 − E tanh.
        let rule = GaussLegendre::new(16).unwrap();
        assert_eq!(bpsk_mmse(0.0, &rule), 1.0);
        assert!((bpsk_mmse(9.87, &rule) - 0.0025871993060151).abs() < 1e-12);
        assert!(bpsk_mmse(1e4, &rule) < 1e-300);
        let mut prev = 1.0;
        for i in 1..200 {
            let m = bpsk_mmse(i as f64 * 0.25, &rule);
            assert!(m < prev && m > 0.0);
            prev = m;
        }
    }

    #[test]
    fn io_beats_mmse_beats_mf() {
        // Nonlinear optimal detection suppresses interference at least as well
        // as the linear detectors at moderate load.
        let s = FixedPointSettings::default();
        let profile = point(10.0, 4);
        let io = efficiency_io(&profile, 0.5, &s).unwrap().value();
        let mmse = efficiency_mmse(&profile, 0.5, &s).unwrap().value();
        let mf = efficiency_mf(&profile, 0.5).unwrap().value();
        assert!(io >= mmse && mmse >= mf, "io={io} mmse={mmse} mf={mf}");
    }

    #[test]
    fn tiny_snr_recovers_full_efficiency() {
        let s = FixedPointSettings::default();
        let profile = point(1e-9, 4);
        assert!(1.0 - efficiency_mmse(&profile, 0.9, &s).unwrap().value() < 1e-8);
        assert!(1.0 - efficiency_io(&profile, 0.9, &s).unwrap().value() < 1e-8);
    }

    #[test]
    fn solver_dispatch() {
        let mut solver = EfficiencySolver::new(FixedPointSettings::default()).unwrap();
        let profile = point(8.0, 8);
        assert_eq!(
            solver
                .efficiency(ReceiverKind::De, &profile, 0.25)
                .unwrap()
                .value(),
            0.75
        );
        let mf = solver
            .efficiency(ReceiverKind::Mf, &profile, 0.25)
            .unwrap()
            .value();
        assert!((mf - 1.0 / 3.0).abs() < 1e-15);
        assert!(solver.efficiency(ReceiverKind::Io, &profile, 0.25).is_ok());
    }

    fn profile_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..50.0, 1..12)
    }

    proptest! {
        #[test]
        fn efficiencies_lie_in_unit_interval(snr in profile_strategy(), alpha in 0.0f64..0.99) {
            let s = FixedPointSettings::default();
            let p = SnrProfile::new(snr).unwrap();
            for kind in [ReceiverKind::Mf, ReceiverKind::De, ReceiverKind::Mmse] {
                let eta = efficiency(kind, &p, alpha, &s).unwrap().value();
                prop_assert!(eta > 0.0 && eta <= 1.0);
            }
        }

        #[test]
        fn io_lies_in_unit_interval(snr in proptest::collection::vec(0.0f64..20.0, 1..6), alpha in 0.0f64..0.8) {
            let s = FixedPointSettings::default();
            let p = SnrProfile::new(snr).unwrap();
            let eta = efficiency_io(&p, alpha, &s).unwrap().value();
            prop_assert!(eta > 0.0 && eta <= 1.0);
        }

        #[test]
        fn efficiency_decreases_with_snr(
            snr in profile_strategy(),
            bumps in proptest::collection::vec(0.0f64..10.0, 12),
            alpha in 0.0f64..1.1,
        ) {
            let s = FixedPointSettings::default();
            let low = SnrProfile::new(snr.clone()).unwrap();
            let high = SnrProfile::new(snr.iter().zip(&bumps).map(|(g, b)| g + b).collect()).unwrap();
            let mmse_low = efficiency_mmse(&low, alpha, &s).unwrap().value();
            let mmse_high = efficiency_mmse(&high, alpha, &s).unwrap().value();
            prop_assert!(mmse_high <= mmse_low + 2.0 * s.tolerance);
            let mf_low = efficiency_mf(&low, alpha).unwrap().value();
            let mf_high = efficiency_mf(&high, alpha).unwrap().value();
            prop_assert!(mf_high <= mf_low);
        }

        #[test]
        fn point_mass_agrees_with_closed_form(gamma_star in 0.5f64..20.0, frac in 0.0f64..0.95) {
            let alpha = frac * (1.0 + 1.0 / gamma_star);
            let (closed, snr) = efficiency_mmse_equal_power(gamma_star, alpha).unwrap();
            let solved = efficiency_mmse(&point(snr, 3), alpha, &FixedPointSettings::default()).unwrap();
            prop_assert!((closed.value() - solved.value()).abs() < 1e-9);
        }
    }
}
