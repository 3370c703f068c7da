//! The unified power control iteration.
//!
//! Each step computes the large-system efficiency from the current SNR
//! profile and sets `p_k = γ*_k σ² / (η h_k)`. In SNR coordinates this is the
//! map `Γ ← I(Γ)` with `I_k(Γ) = γ*_k / η(Γ)`.

use alloc::format;
use alloc::vec::Vec;

use crate::efficiency::{Efficiency, EfficiencySolver, FixedPointSettings};
use crate::scenario::{snr_from_power, PowerVector, ReceiverKind, Scenario, SnrProfile};
use crate::{Error, Result};

const RELATIVE_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpcSettings {
    /// Stop once the largest relative power change falls below this.
    pub power_tolerance_rel: f64,
    pub max_iterations: usize,
}

impl Default for UpcSettings {
    fn default() -> Self {
        UpcSettings {
            power_tolerance_rel: 1e-9,
            max_iterations: 500,
        }
    }
}

impl UpcSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_tolerance_rel > 0.0) {
            return Err(Error::invalid("power tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// State at the start of iteration `iteration`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpcStep {
    pub iteration: usize,
    pub powers: PowerVector,
    pub snrs: SnrProfile,
    /// Per-user efficiency computed from `snrs`.
    pub efficiency: Vec<Efficiency>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpcTrace {
    pub steps: Vec<UpcStep>,
    pub converged: bool,
    pub final_powers: PowerVector,
}

impl UpcTrace {
    /// Number of power updates performed.
    pub fn iterations(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn last(&self) -> &UpcStep {
        self.steps.last().expect("a trace always holds the initial step")
    }

    pub fn final_snrs(&self) -> &SnrProfile {
        &self.last().snrs
    }
}

/// Whether the equal-target steady state exists for `receiver` at load `alpha`.
///
/// * DE: `α < 1`.
/// * MMSE: `α < 1 + 1/γ*`.
/// * MF: `α γ* < 1`, from `Γ = γ* (1 + α Γ)`.
/// * IO: always `true`; no closed-form criterion is known, so the iteration
///   relies on its iteration cap instead.
pub fn is_feasible(receiver: ReceiverKind, alpha: f64, gamma_star_max: f64) -> bool {
    match receiver {
        ReceiverKind::De => alpha < 1.0,
        ReceiverKind::Mmse => alpha < 1.0 + 1.0 / gamma_star_max,
        ReceiverKind::Mf => alpha * gamma_star_max < 1.0,
        ReceiverKind::Io => true,
    }
}

fn check_feasible(scenario: &Scenario) -> Result<()> {
    let alpha = scenario.load();
    let gamma_star = scenario.max_target();
    if is_feasible(scenario.receiver(), alpha, gamma_star) {
        Ok(())
    } else {
        Err(Error::InfeasibleLoad {
            receiver: scenario.receiver(),
            alpha,
            gamma_star,
        })
    }
}

fn apply_map(
    snrs: &SnrProfile,
    scenario: &Scenario,
    solver: &mut EfficiencySolver,
) -> Result<(Efficiency, SnrProfile)> {
    scenario.check_len(snrs.len())?;
    let eta = solver.efficiency(scenario.receiver(), snrs, scenario.load())?;
    let next = scenario.target_sirs().iter().map(|g| g / eta.value()).collect();
    Ok((eta, SnrProfile::new(next)?))
}

/// `I(Γ)`: the SNRs needed to hit every target given the efficiency at `Γ`.
pub fn interference_map(
    snrs: &SnrProfile,
    scenario: &Scenario,
    settings: &FixedPointSettings,
) -> Result<SnrProfile> {
    check_feasible(scenario)?;
    let mut solver = EfficiencySolver::new(*settings)?;
    apply_map(snrs, scenario, &mut solver).map(|(_, next)| next)
}

fn max_relative_change(previous: &PowerVector, next: &PowerVector) -> f64 {
    previous
        .as_slice()
        .iter()
        .zip(next.as_slice())
        .map(|(p, q)| (q - p).abs() / p.max(RELATIVE_GUARD))
        .fold(0.0, f64::max)
}

/// Runs the power control iteration from `initial_powers`.
///
/// The efficiency is solved once per iteration and shared by every user.
/// Hitting `max_iterations` is reported through `converged = false`.
pub fn upc_run(
    scenario: &Scenario,
    initial_powers: &PowerVector,
    upc_settings: &UpcSettings,
    fp_settings: &FixedPointSettings,
) -> Result<UpcTrace> {
    upc_settings.validate()?;
    check_feasible(scenario)?;
    scenario.check_len(initial_powers.len())?;
    let mut solver = EfficiencySolver::new(*fp_settings)?;

    let noise = scenario.noise_power();
    let mut steps: Vec<UpcStep> = Vec::new();
    let mut powers = initial_powers.clone();
    let mut converged = false;
    for iteration in 0..=upc_settings.max_iterations {
        let snrs = snr_from_power(&powers, scenario)?;
        let eta = solver.efficiency(scenario.receiver(), &snrs, scenario.load())?;
        if let Some(prev) = steps.last() {
            if max_relative_change(&prev.powers, &powers) < upc_settings.power_tolerance_rel {
                converged = true;
            }
        }
        steps.push(UpcStep {
            iteration,
            powers: powers.clone(),
            snrs,
            efficiency: alloc::vec![eta; scenario.num_users()],
        });
        if converged || iteration == upc_settings.max_iterations {
            break;
        }
        powers = PowerVector::new(
            scenario
                .target_sirs()
                .iter()
                .zip(scenario.channel_gains())
                .map(|(g, h)| g * noise / (eta.value() * h))
                .collect(),
        )?;
    }
    let final_powers = steps.last().expect("at least one step").powers.clone();
    Ok(UpcTrace {
        steps,
        converged,
        final_powers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Positivity,
    Monotonicity,
    Scalability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub property: Property,
    /// Index into the sample pairs.
    pub sample: usize,
    /// Scaling factor, for scalability violations.
    pub theta: Option<f64>,
    pub user: usize,
    /// By how much the inequality failed, in the map's output units.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyReport {
    pub positivity_checks: usize,
    pub monotonicity_checks: usize,
    pub scalability_checks: usize,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, property: Property) -> usize {
        self.violations.iter().filter(|v| v.property == property).count()
    }
}

/// Evaluates the interference map on sample pairs `(Γ, Γ')` with `Γ' ≥ Γ`
/// and reports every failure of
///
/// 1. positivity `I(Γ) > 0`,
/// 2. monotonicity `I(Γ') ≥ I(Γ)`,
/// 3. scalability `θ I(Γ) > I(θ Γ)` for each `θ > 1`.
///
/// Non-strict comparisons tolerate a relative slack of ten solver tolerances,
/// the accuracy of the underlying efficiency solve.
pub fn check_standard_interference(
    scenario: &Scenario,
    samples: &[(SnrProfile, SnrProfile)],
    thetas: &[f64],
    settings: &FixedPointSettings,
) -> Result<PropertyReport> {
    check_feasible(scenario)?;
    if let Some(theta) = thetas.iter().find(|t| !(**t > 1.0)) {
        return Err(Error::invalid(format!(
            "scaling factors must exceed 1, got {theta}"
        )));
    }
    for (i, (low, high)) in samples.iter().enumerate() {
        scenario.check_len(low.len())?;
        scenario.check_len(high.len())?;
        if !high.dominates(low) {
            return Err(Error::invalid(format!(
                "sample pair {i} is not ordered element-wise"
            )));
        }
    }

    let slack = 10.0 * settings.tolerance;
    let mut solver = EfficiencySolver::new(*settings)?;
    let mut report = PropertyReport::default();
    for (sample, (low, high)) in samples.iter().enumerate() {
        let (_, i_low) = apply_map(low, scenario, &mut solver)?;
        let (_, i_high) = apply_map(high, scenario, &mut solver)?;
        for (user, v) in i_low.as_slice().iter().enumerate() {
            report.positivity_checks += 1;
            if !(*v > 0.0) {
                report.violations.push(Violation {
                    property: Property::Positivity,
                    sample,
                    theta: None,
                    user,
                    margin: -v,
                });
            }
        }
        for (user, (a, b)) in i_low.as_slice().iter().zip(i_high.as_slice()).enumerate() {
            report.monotonicity_checks += 1;
            if *b < *a * (1.0 - slack) {
                report.violations.push(Violation {
                    property: Property::Monotonicity,
                    sample,
                    theta: None,
                    user,
                    margin: a - b,
                });
            }
        }
        for &theta in thetas {
            let (_, i_scaled) = apply_map(&low.scaled(theta)?, scenario, &mut solver)?;
            for (user, (a, b)) in i_low.as_slice().iter().zip(i_scaled.as_slice()).enumerate() {
                report.scalability_checks += 1;
                if !(theta * a > *b) {
                    report.violations.push(Violation {
                        property: Property::Scalability,
                        sample,
                        theta: Some(theta),
                        user,
                        margin: b - theta * a,
                    });
                }
            }
        }
    }
    Ok(report)
}
