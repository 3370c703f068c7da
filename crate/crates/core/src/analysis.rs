//! How far the true SIR strays from the target once powers are frozen at the
//! large-system steady state.
//!
//! Two closed-form approximations (a beta law for the decorrelator and a
//! Gaussian law for the MMSE detector) are paired with a Monte Carlo
//! estimator that draws fresh spreading matrices per trial.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::efficiency::{efficiency_mmse_equal_power, FixedPointSettings};
use crate::finite::{de_noise_factor, exact_sir_snr, RngSpec, SpreadingMatrix};
use crate::scenario::{PowerVector, ReceiverKind, Scenario};
use crate::special::{betainc, ln_beta, norm_cdf};
use crate::upc::{is_feasible, upc_run, UpcSettings};
use crate::{from_db, Error, Result};

/// Cap on consecutive singular redraws within one trial.
pub const MAX_REDRAWS: u32 = 10_000;

/// The measured user in Monte Carlo runs. At an equal-target steady state
/// all users are statistically identical.
pub const MEASURED_USER: usize = 0;

/// The grid of processing gains and loads of the summary table.
pub const TABLE1_GRID: [(usize, f64); 6] = [
    (16, 0.25),
    (16, 0.75),
    (64, 0.25),
    (64, 0.75),
    (256, 0.25),
    (256, 0.75),
];

/// SIR interval within `delta_db` dB of the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBand {
    pub delta_db: f64,
    pub gamma_star: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
}

impl DeltaBand {
    pub fn new(gamma_star: f64, delta_db: f64) -> Result<Self> {
        if !(delta_db > 0.0) {
            return Err(Error::invalid(format!(
                "band width must be positive, got {delta_db} dB"
            )));
        }
        if !(gamma_star > 0.0) || !gamma_star.is_finite() {
            return Err(Error::invalid(format!(
                "target SIR must be positive, got {gamma_star}"
            )));
        }
        Ok(DeltaBand {
            delta_db,
            gamma_star,
            gamma_low: from_db(-delta_db) * gamma_star,
            gamma_high: from_db(delta_db) * gamma_star,
        })
    }

    pub fn contains(&self, sir: f64) -> bool {
        self.gamma_low <= sir && sir <= self.gamma_high
    }
}

fn check_beta_dims(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::unsupported(format!(
            "the decorrelator beta approximation needs 2 <= K <= N, got K = {k}, N = {n}"
        )));
    }
    Ok(())
}

fn de_steady_snr(n: usize, k: usize, gamma_star: f64) -> Result<f64> {
    let alpha = k as f64 / n as f64;
    if alpha >= 1.0 {
        return Err(Error::InfeasibleLoad {
            receiver: ReceiverKind::De,
            alpha,
            gamma_star,
        });
    }
    Ok(gamma_star / (1.0 - alpha))
}

/// Approximate density of the decorrelator output SIR at the steady state:
/// `z / Γ*` follows `Beta(N − K + 1, K − 1)` with `Γ* = γ* / (1 − α)`.
pub fn de_sir_pdf(z: f64, n: usize, k: usize, gamma_star: f64) -> Result<f64> {
    check_beta_dims(n, k)?;
    let top = de_steady_snr(n, k, gamma_star)?;
    if !(z > 0.0 && z < top) {
        return Ok(0.0);
    }
    let (a, b) = ((n - k + 1) as f64, (k - 1) as f64);
    let x = z / top;
    let ln = (a - 1.0) * libm::log(x) + (b - 1.0) * libm::log1p(-x) - ln_beta(a, b);
    Ok(libm::exp(ln) / top)
}

/// CDF matching [`de_sir_pdf`].
pub fn de_sir_cdf(z: f64, n: usize, k: usize, gamma_star: f64) -> Result<f64> {
    check_beta_dims(n, k)?;
    let top = de_steady_snr(n, k, gamma_star)?;
    let x = (z / top).clamp(0.0, 1.0);
    betainc((n - k + 1) as f64, (k - 1) as f64, x)
}

/// Probability under the beta approximation that the decorrelator SIR stays
/// within `delta_db` of the target. The upper band edge is clipped to the
/// support end `Γ*`.
pub fn p_delta_de(n: usize, k: usize, gamma_star: f64, delta_db: f64) -> Result<f64> {
    let band = DeltaBand::new(gamma_star, delta_db)?;
    let high = de_sir_cdf(band.gamma_high, n, k, gamma_star)?;
    let low = de_sir_cdf(band.gamma_low, n, k, gamma_star)?;
    Ok((high - low).clamp(0.0, 1.0))
}

/// `c` in the Gaussian approximation `γ ~ N(γ*, c/N)` for the MMSE SIR:
/// `c = 2γ*² / (1 − α (γ*/(1+γ*))²)`.
pub fn mmse_sir_variance_c(gamma_star: f64, alpha: f64) -> Result<f64> {
    if !(gamma_star > 0.0) || !(alpha >= 0.0) {
        return Err(Error::invalid("need gamma_star > 0 and alpha >= 0"));
    }
    let ratio = gamma_star / (1.0 + gamma_star);
    let denom = 1.0 - alpha * ratio * ratio;
    if !(denom > 0.0) {
        return Err(Error::unsupported(format!(
            "variance constant undefined at alpha = {alpha}, gamma_star = {gamma_star}"
        )));
    }
    Ok(2.0 * gamma_star * gamma_star / denom)
}

/// Gaussian-approximation CDF of the MMSE output SIR.
pub fn mmse_sir_cdf(z: f64, n: usize, alpha: f64, gamma_star: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("processing gain must be at least 1"));
    }
    let c = mmse_sir_variance_c(gamma_star, alpha)?;
    Ok(norm_cdf(libm::sqrt(n as f64 / c) * (z - gamma_star)))
}

/// Probability under the Gaussian approximation that the MMSE SIR stays
/// within `delta_db` of the target.
pub fn p_delta_mmse(n: usize, alpha: f64, gamma_star: f64, delta_db: f64) -> Result<f64> {
    let band = DeltaBand::new(gamma_star, delta_db)?;
    let high = mmse_sir_cdf(band.gamma_high, n, alpha, gamma_star)?;
    let low = mmse_sir_cdf(band.gamma_low, n, alpha, gamma_star)?;
    Ok(high - low)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloReport {
    pub estimate: f64,
    pub trials: usize,
    pub seed: RngSpec,
    pub rejected_singular: u64,
    pub std_error: f64,
    pub measured_user: usize,
}

impl MonteCarloReport {
    pub fn from_counts(counts: TrialCounts, trials: usize, seed: RngSpec) -> Self {
        let estimate = counts.inside as f64 / trials as f64;
        MonteCarloReport {
            estimate,
            trials,
            seed,
            rejected_singular: counts.rejected,
            std_error: libm::sqrt(estimate * (1.0 - estimate) / trials as f64),
            measured_user: MEASURED_USER,
        }
    }
}

/// Per-range tallies; ranges can be combined in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialCounts {
    pub inside: u64,
    pub rejected: u64,
}

impl core::ops::Add for TrialCounts {
    type Output = TrialCounts;

    fn add(self, other: TrialCounts) -> TrialCounts {
        TrialCounts {
            inside: self.inside + other.inside,
            rejected: self.rejected + other.rejected,
        }
    }
}

/// SNR profile at the steady state of the power control iteration.
///
/// With a common target the closed forms are used directly; otherwise the
/// iteration is run from zero power.
pub fn steady_state_snrs(scenario: &Scenario) -> Result<Vec<f64>> {
    let alpha = scenario.load();
    let k = scenario.num_users();
    if let Some(gamma_star) = scenario.common_target() {
        if !is_feasible(scenario.receiver(), alpha, gamma_star) {
            return Err(Error::InfeasibleLoad {
                receiver: scenario.receiver(),
                alpha,
                gamma_star,
            });
        }
        match scenario.receiver() {
            ReceiverKind::De => return Ok(alloc::vec![gamma_star / (1.0 - alpha); k]),
            ReceiverKind::Mmse => {
                let (_, snr) = efficiency_mmse_equal_power(gamma_star, alpha)?;
                return Ok(alloc::vec![snr; k]);
            }
            ReceiverKind::Mf => return Ok(alloc::vec![gamma_star / (1.0 - alpha * gamma_star); k]),
            ReceiverKind::Io => {}
        }
    }
    let trace = upc_run(
        scenario,
        &PowerVector::zeros(k),
        &UpcSettings::default(),
        &FixedPointSettings::default(),
    )?;
    if !trace.converged {
        return Err(Error::SolverFailure {
            iterations: trace.iterations(),
            residual: f64::NAN,
        });
    }
    Ok(trace.final_snrs().as_slice().to_vec())
}

/// Frozen steady-state SNRs plus everything needed to evaluate one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSetup {
    receiver: ReceiverKind,
    chips: usize,
    snr: Vec<f64>,
    band: DeltaBand,
}

impl MonteCarloSetup {
    /// Restricted to the decorrelator and MMSE receivers.
    pub fn new(scenario: &Scenario, delta_db: f64) -> Result<Self> {
        match scenario.receiver() {
            ReceiverKind::De | ReceiverKind::Mmse => {}
            other => {
                return Err(Error::unsupported(format!(
                    "Monte Carlo deviation analysis supports de and mmse, not {other}"
                )))
            }
        }
        let snr = steady_state_snrs(scenario)?;
        let band = DeltaBand::new(scenario.target_sirs()[MEASURED_USER], delta_db)?;
        Ok(MonteCarloSetup {
            receiver: scenario.receiver(),
            chips: scenario.processing_gain(),
            snr,
            band,
        })
    }

    pub fn band(&self) -> &DeltaBand {
        &self.band
    }

    pub fn snrs(&self) -> &[f64] {
        &self.snr
    }

    /// True SIR of the measured user for one trial, redrawing singular
    /// matrices from the same stream. Returns `(sir, rejected_draws)`.
    pub fn trial_sir(&self, spec: RngSpec) -> Result<(f64, u64)> {
        let mut rng = spec.rng();
        let mut rejected = 0u64;
        loop {
            let s = SpreadingMatrix::sample(self.snr.len(), self.chips, &mut rng)?;
            let result = match self.receiver {
                ReceiverKind::De => de_noise_factor(&s, MEASURED_USER).map(|f| self.snr[MEASURED_USER] * f),
                other => exact_sir_snr(other, &s, &self.snr, MEASURED_USER),
            };
            match result {
                Ok(sir) => return Ok((sir, rejected)),
                Err(Error::Singular { .. }) if rejected < u64::from(MAX_REDRAWS) => rejected += 1,
                Err(e) => return Err(e),
            }
        }
    }

    /// Tallies trials `range` of the experiment seeded by `base`.
    pub fn count_in_band(&self, base: &RngSpec, range: Range<u64>) -> Result<TrialCounts> {
        let mut counts = TrialCounts::default();
        for t in range {
            let (sir, rejected) = self.trial_sir(base.trial(t))?;
            counts.rejected += rejected;
            if self.band.contains(sir) {
                counts.inside += 1;
            }
        }
        Ok(counts)
    }

    /// SIR samples for trials `range`, plus the rejected-draw count.
    pub fn sample_range(&self, base: &RngSpec, range: Range<u64>) -> Result<(Vec<f64>, u64)> {
        let mut values = Vec::with_capacity(range.end.saturating_sub(range.start) as usize);
        let mut rejected = 0;
        for t in range {
            let (sir, r) = self.trial_sir(base.trial(t))?;
            rejected += r;
            values.push(sir);
        }
        Ok((values, rejected))
    }
}

/// Fraction of `trials` spreading realizations in which the measured user's
/// true SIR lands inside the band.
pub fn monte_carlo_p_delta(
    scenario: &Scenario,
    delta_db: f64,
    trials: usize,
    rng: RngSpec,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let setup = MonteCarloSetup::new(scenario, delta_db)?;
    let counts = setup.count_in_band(&rng, 0..trials as u64)?;
    Ok(MonteCarloReport::from_counts(counts, trials, rng))
}

/// Step-function CDF of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical CDF needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("samples must not contain NaN"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// `(value, cumulative fraction)` at each distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = frac,
                _ => out.push((*v, frac)),
            }
        }
        out
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// Default Monte Carlo budget by processing gain.
pub fn default_trials(processing_gain: usize) -> usize {
    if processing_gain <= 64 {
        100_000
    } else {
        10_000
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub processing_gain: usize,
    pub alpha: f64,
    pub receiver: ReceiverKind,
    pub sim: Result<MonteCarloReport>,
    pub approx: Result<f64>,
}

impl Table1Row {
    pub fn is_ok(&self) -> bool {
        self.sim.is_ok() && self.approx.is_ok()
    }
}

fn users_for(n: usize, alpha: f64) -> Result<usize> {
    let k = libm::round(alpha * n as f64);
    if !(alpha > 0.0) || (k - alpha * n as f64).abs() > 1e-9 || k < 1.0 {
        return Err(Error::invalid(format!(
            "alpha = {alpha} times N = {n} is not a positive integer"
        )));
    }
    Ok(k as usize)
}

/// Summary table of simulated and approximate in-band probabilities, one row
/// per grid entry and receiver (decorrelator first).
///
/// `estimator` computes the simulated column; [`table1`] plugs in
/// [`monte_carlo_p_delta`]. Each cell uses its own stream derived from `rng`,
/// and a failing cell is reported in its row without aborting the table.
pub fn table1_with<F>(
    gamma_star: f64,
    delta_db: f64,
    grid: &[(usize, f64)],
    trials: Option<usize>,
    rng: RngSpec,
    mut estimator: F,
) -> Vec<Table1Row>
where
    F: FnMut(&Scenario, f64, usize, RngSpec) -> Result<MonteCarloReport>,
{
    let mut rows = Vec::with_capacity(grid.len() * 2);
    for (cell, &(n, alpha)) in grid.iter().enumerate() {
        for (r, receiver) in [ReceiverKind::De, ReceiverKind::Mmse].into_iter().enumerate() {
            let users = users_for(n, alpha);
            let approx = users.clone().and_then(|k| match receiver {
                ReceiverKind::De => p_delta_de(n, k, gamma_star, delta_db),
                _ => p_delta_mmse(n, alpha, gamma_star, delta_db),
            });
            let cell_rng = rng.trial((2 * cell + r) as u64);
            let budget = trials.unwrap_or_else(|| default_trials(n));
            let sim = users
                .and_then(|k| Scenario::normalized(k, n, gamma_star, receiver))
                .and_then(|scenario| estimator(&scenario, delta_db, budget, cell_rng));
            rows.push(Table1Row {
                processing_gain: n,
                alpha,
                receiver,
                sim,
                approx,
            });
        }
    }
    rows
}

/// [`table1_with`] using the sequential Monte Carlo estimator.
pub fn table1(
    gamma_star: f64,
    delta_db: f64,
    grid: &[(usize, f64)],
    trials: Option<usize>,
    rng: RngSpec,
) -> Vec<Table1Row> {
    table1_with(gamma_star, delta_db, grid, trials, rng, monte_carlo_p_delta)
}
