//! Experiment orchestration: each experiment produces one [`Table`].

use std::path::PathBuf;
use std::str::FromStr;

use upc_core::analysis::{
    de_sir_cdf, mmse_sir_cdf, mmse_sir_variance_c, table1_with, EmpiricalCdf, MAX_REDRAWS, MEASURED_USER,
    TABLE1_GRID,
};
use upc_core::efficiency::{EfficiencySolver, FixedPointSettings};
use upc_core::finite::{
    ber_from_sir, exact_sir_snr, exact_sirs_snr, sir_based_iteration, RngSpec, SpreadingMatrix,
};
use upc_core::scenario::snr_from_power;
use upc_core::upc::{upc_run, UpcSettings};
use upc_core::{to_db, Error, PowerVector, ReceiverKind, Scenario, SnrProfile};

use crate::emit::{emit, Cell, Format, Table};
use crate::error::{Result, SimError};
use crate::parallel::Runner;

/// Power vector the iteration starts from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPowers {
    Zero,
    Constant(f64),
    List(Vec<f64>),
}

impl InitialPowers {
    pub fn resolve(&self, num_users: usize) -> Result<PowerVector> {
        let p = match self {
            InitialPowers::Zero => PowerVector::zeros(num_users),
            InitialPowers::Constant(x) => PowerVector::constant(*x, num_users)?,
            InitialPowers::List(v) => {
                if v.len() != num_users {
                    return Err(SimError::Usage(format!(
                        "{} initial powers given for {num_users} users",
                        v.len()
                    )));
                }
                PowerVector::new(v.clone())?
            }
        };
        Ok(p)
    }
}

impl FromStr for InitialPowers {
    type Err = SimError;

    /// `zero`, `const:<watts>` or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| SimError::Usage(format!("bad initial powers `{s}`: {what}"));
        if s == "zero" {
            return Ok(InitialPowers::Zero);
        }
        if let Some(x) = s.strip_prefix("const:") {
            return x
                .parse()
                .map(InitialPowers::Constant)
                .map_err(|_| bad("expected const:<number>"));
        }
        parse_list(s)
            .map(InitialPowers::List)
            .map_err(|_| bad("expected zero, const:<x> or a list"))
    }
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|x| x.trim().parse()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    EfficiencyQuery {
        receiver: ReceiverKind,
        alpha: f64,
        profile: SnrProfile,
    },
    UpcTrace {
        scenario: Scenario,
        initial: InitialPowers,
    },
    BaselineCompare {
        scenario: Scenario,
        symbols: usize,
        rng: RngSpec,
    },
    Cdf {
        scenario: Scenario,
        trials: usize,
        rng: RngSpec,
        points: usize,
    },
    Table1 {
        gamma_star: f64,
        delta_db: f64,
        trials: Option<usize>,
        rng: RngSpec,
        grid: Vec<(usize, f64)>,
    },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::EfficiencyQuery { .. } => "efficiency_query",
            ExperimentKind::UpcTrace { .. } => "upc_trace",
            ExperimentKind::BaselineCompare { .. } => "baseline_compare",
            ExperimentKind::Cdf { .. } => "cdf",
            ExperimentKind::Table1 { .. } => "table1",
        }
    }

    pub fn table1(gamma_star: f64, delta_db: f64, trials: Option<usize>, rng: RngSpec) -> Self {
        ExperimentKind::Table1 {
            gamma_star,
            delta_db,
            trials,
            rng,
            grid: TABLE1_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Standard output when `None`.
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// A finished table plus the number of cells that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub failed_cells: usize,
}

/// Runs and emits an experiment. A table with failed cells is still written,
/// then reported as [`SimError::Incomplete`].
pub fn run_experiment(spec: &ExperimentSpec, runner: &Runner) -> Result<Table> {
    let outcome = compute(&spec.kind, runner)?;
    emit(&outcome.table, spec.format, spec.out.as_deref())?;
    if outcome.failed_cells > 0 {
        return Err(SimError::Incomplete {
            failed: outcome.failed_cells,
            total: outcome.table.rows.len(),
        });
    }
    Ok(outcome.table)
}

pub fn compute(kind: &ExperimentKind, runner: &Runner) -> Result<Outcome> {
    let complete = |table| Outcome {
        table,
        failed_cells: 0,
    };
    match kind {
        ExperimentKind::EfficiencyQuery {
            receiver,
            alpha,
            profile,
        } => efficiency_query(*receiver, *alpha, profile).map(complete),
        ExperimentKind::UpcTrace { scenario, initial } => upc_trace(scenario, initial).map(complete),
        ExperimentKind::BaselineCompare {
            scenario,
            symbols,
            rng,
        } => baseline_compare(scenario, *symbols, *rng).map(complete),
        ExperimentKind::Cdf {
            scenario,
            trials,
            rng,
            points,
        } => cdf(scenario, *trials, *rng, *points, runner).map(complete),
        ExperimentKind::Table1 {
            gamma_star,
            delta_db,
            trials,
            rng,
            grid,
        } => table1(*gamma_star, *delta_db, *trials, *rng, grid, runner),
    }
}

pub fn efficiency_query(receiver: ReceiverKind, alpha: f64, profile: &SnrProfile) -> Result<Table> {
    let mut solver = EfficiencySolver::new(FixedPointSettings::default())?;
    let eta = solver.efficiency(receiver, profile, alpha)?.value();
    let mut table = Table::new(["receiver", "alpha", "mean_snr_linear", "eta", "eta_db"]);
    table.push(vec![
        receiver.as_str().into(),
        alpha.into(),
        profile.mean().into(),
        eta.into(),
        to_db(eta).into(),
    ]);
    Ok(table)
}

/// One row per iteration and user (users numbered from 1).
pub fn upc_trace(scenario: &Scenario, initial: &InitialPowers) -> Result<Table> {
    let init = initial.resolve(scenario.num_users())?;
    let trace = upc_run(
        scenario,
        &init,
        &UpcSettings::default(),
        &FixedPointSettings::default(),
    )?;
    let mut table = Table::new([
        "iteration",
        "user",
        "power_watts",
        "power_dbw",
        "snr_linear",
        "snr_db",
        "eta",
        "sir_large_system",
        "sir_large_system_db",
    ]);
    table.meta("receiver", scenario.receiver());
    table.meta("num_users", scenario.num_users());
    table.meta("processing_gain", scenario.processing_gain());
    table.meta("converged", trace.converged);
    table.meta("iterations", trace.iterations());
    for step in &trace.steps {
        for (user, (p, g)) in step
            .powers
            .as_slice()
            .iter()
            .zip(step.snrs.as_slice())
            .enumerate()
        {
            let eta = step.efficiency[user].value();
            table.push(vec![
                step.iteration.into(),
                (user + 1).into(),
                (*p).into(),
                to_db(*p).into(),
                (*g).into(),
                to_db(*g).into(),
                eta.into(),
                (eta * g).into(),
                to_db(eta * g).into(),
            ]);
        }
    }
    Ok(table)
}

/// Redraws singular realizations from the same stream.
fn draw_usable(
    scenario: &Scenario,
    snr: &[f64],
    spec: RngSpec,
    rejected: &mut u64,
) -> Result<SpreadingMatrix> {
    let mut rng = spec.rng();
    let mut redraws = 0;
    loop {
        let s = SpreadingMatrix::sample(scenario.num_users(), scenario.processing_gain(), &mut rng)?;
        match exact_sirs_snr(scenario.receiver(), &s, snr) {
            Ok(_) => return Ok(s),
            Err(Error::Singular { .. }) if redraws < MAX_REDRAWS => {
                redraws += 1;
                *rejected += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

const BASELINE_MAX_ITERATIONS: usize = 200;
const BASELINE_TOLERANCE: f64 = 1e-9;

/// Per-symbol comparison with long spreading sequences: a fresh spreading
/// matrix every symbol. UPC keeps its steady-state powers; the SIR-driven
/// baseline re-converges on every matrix, starting from its previous powers.
/// BER is the Gaussian-interference value `Q(√γ)`, not a bit simulation.
pub fn baseline_compare(scenario: &Scenario, symbols: usize, rng: RngSpec) -> Result<Table> {
    if matches!(scenario.receiver(), ReceiverKind::Io) {
        return Err(Error::UnsupportedParameters(
            "the individually optimal detector has no closed-form SIR".into(),
        )
        .into());
    }
    let trace = upc_run(
        scenario,
        &PowerVector::zeros(scenario.num_users()),
        &UpcSettings::default(),
        &FixedPointSettings::default(),
    )?;
    if !trace.converged {
        return Err(Error::SolverFailure {
            iterations: trace.iterations(),
            residual: f64::NAN,
        }
        .into());
    }
    let upc_powers = trace.final_powers.clone();
    let upc_snr = snr_from_power(&upc_powers, scenario)?;
    let mut baseline_powers = upc_powers.clone();
    let mut rejected = 0u64;
    let target = scenario.target_sirs()[MEASURED_USER];
    let mut table = Table::new([
        "symbol",
        "upc_power_watts",
        "upc_sir_linear",
        "upc_sir_db",
        "upc_ber",
        "baseline_power_watts",
        "baseline_sir_linear",
        "baseline_sir_db",
        "baseline_ber",
        "baseline_iterations",
        "baseline_converged",
    ]);
    let mut rows = Vec::with_capacity(symbols);
    for symbol in 0..symbols {
        let s = draw_usable(
            scenario,
            upc_snr.as_slice(),
            rng.trial(symbol as u64),
            &mut rejected,
        )?;
        let upc_sir = exact_sir_snr(scenario.receiver(), &s, upc_snr.as_slice(), MEASURED_USER)?;
        let outcome = sir_based_iteration(
            scenario,
            &s,
            &baseline_powers,
            BASELINE_MAX_ITERATIONS,
            BASELINE_TOLERANCE,
        )?;
        let base_sir = outcome.sirs[MEASURED_USER];
        rows.push(vec![
            symbol.into(),
            upc_powers.as_slice()[MEASURED_USER].into(),
            upc_sir.into(),
            to_db(upc_sir).into(),
            ber_from_sir(upc_sir).into(),
            outcome.powers.as_slice()[MEASURED_USER].into(),
            base_sir.into(),
            to_db(base_sir).into(),
            ber_from_sir(base_sir).into(),
            outcome.iterations.into(),
            outcome.converged.into(),
        ]);
        baseline_powers = outcome.powers;
    }
    table.meta("seed", rng.seed);
    table.meta("stream", rng.stream_id);
    table.meta("symbols", symbols);
    table.meta("rejected_singular", rejected);
    table.meta("receiver", scenario.receiver());
    table.meta("measured_user", MEASURED_USER + 1);
    table.meta("ber", "analytic_q_sqrt_sir");
    table.meta("target_ber", crate::emit::format_number(ber_from_sir(target)));
    table.rows = rows;
    Ok(table)
}

/// Empirical CDF of the measured user's SIR at the frozen steady state, on a
/// uniform grid spanning the samples, next to the large-system approximation.
pub fn cdf(
    scenario: &Scenario,
    trials: usize,
    rng: RngSpec,
    points: usize,
    runner: &Runner,
) -> Result<Table> {
    if points < 2 {
        return Err(SimError::Usage(
            "at least two CDF grid points are required".into(),
        ));
    }
    let (samples, rejected) = runner.samples(scenario, trials, rng)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let cdf = EmpiricalCdf::new(samples)?;
    let sorted = cdf.sorted_samples();
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);

    let n_chips = scenario.processing_gain();
    let k = scenario.num_users();
    let alpha = scenario.load();
    let gamma = scenario.common_target();
    let approx = |z: f64| -> upc_core::Result<f64> {
        let g = gamma
            .ok_or_else(|| Error::UnsupportedParameters("approximation needs a common target".into()))?;
        match scenario.receiver() {
            ReceiverKind::De => de_sir_cdf(z, n_chips, k, g),
            _ => mmse_sir_cdf(z, n_chips, alpha, g),
        }
    };

    let mut table = Table::new(["sir_linear", "sir_db", "empirical_cdf", "approx_cdf"]);
    table.meta("seed", rng.seed);
    table.meta("stream", rng.stream_id);
    table.meta("trials", trials);
    table.meta("rejected_singular", rejected);
    table.meta("receiver", scenario.receiver());
    table.meta("measured_user", MEASURED_USER + 1);
    table.meta("mean", crate::emit::format_number(mean));
    table.meta("variance", crate::emit::format_number(variance));
    if let (ReceiverKind::Mmse, Some(g)) = (scenario.receiver(), gamma) {
        if let Ok(c) = mmse_sir_variance_c(g, alpha) {
            table.meta("c_over_n", crate::emit::format_number(c / n_chips as f64));
        }
    }
    if let Err(e) = approx(lo) {
        table.meta("approx", format!("unavailable ({})", e.kind()));
    }
    for i in 0..points {
        let z = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        table.push(vec![
            z.into(),
            to_db(z).into(),
            cdf.eval(z).into(),
            approx(z).unwrap_or(f64::NAN).into(),
        ]);
    }
    Ok(table)
}

/// Simulated and approximate in-band probabilities; failing cells are kept
/// with their error in the `status` column.
pub fn table1(
    gamma_star: f64,
    delta_db: f64,
    trials: Option<usize>,
    rng: RngSpec,
    grid: &[(usize, f64)],
    runner: &Runner,
) -> Result<Outcome> {
    let rows = table1_with(
        gamma_star,
        delta_db,
        grid,
        trials,
        rng,
        |scenario, delta, budget, cell_rng| {
            runner
                .p_delta(scenario, delta, budget, cell_rng)
                .map_err(|e| match e {
                    SimError::Core(core) => core,
                    other => Error::InvalidArgument(other.to_string()),
                })
        },
    );
    let mut table = Table::new([
        "processing_gain",
        "alpha",
        "receiver",
        "sim",
        "sim_2dp",
        "approx",
        "approx_2dp",
        "std_error",
        "trials",
        "rejected_singular",
        "status",
    ]);
    let mut failed = 0;
    let mut rejected_total = 0;
    for row in &rows {
        let (sim, sim_r, se, n, rej) = match &row.sim {
            Ok(r) => {
                rejected_total += r.rejected_singular;
                (
                    Cell::Num(r.estimate),
                    Cell::Fixed(r.estimate, 2),
                    Cell::Num(r.std_error),
                    r.trials.into(),
                    r.rejected_singular.into(),
                )
            }
            Err(_) => (
                Cell::Num(f64::NAN),
                Cell::Num(f64::NAN),
                Cell::Num(f64::NAN),
                Cell::Int(0),
                Cell::Int(0),
            ),
        };
        let (approx, approx_r) = match &row.approx {
            Ok(a) => (Cell::Num(*a), Cell::Fixed(*a, 2)),
            Err(_) => (Cell::Num(f64::NAN), Cell::Num(f64::NAN)),
        };
        let status = match (&row.sim, &row.approx) {
            (Ok(_), Ok(_)) => "ok".to_string(),
            (Err(e), _) | (_, Err(e)) => {
                failed += 1;
                format!("error: {e}")
            }
        };
        table.push(vec![
            row.processing_gain.into(),
            row.alpha.into(),
            row.receiver.as_str().into(),
            sim,
            sim_r,
            approx,
            approx_r,
            se,
            n,
            rej,
            status.into(),
        ]);
    }
    table.meta("seed", rng.seed);
    table.meta("stream", rng.stream_id);
    table.meta("trials", trials.map_or("default".to_string(), |t| t.to_string()));
    table.meta("rejected_singular", rejected_total);
    table.meta("gamma_star", gamma_star);
    table.meta("delta_db", delta_db);
    table.meta("measured_user", MEASURED_USER + 1);
    Ok(Outcome {
        table,
        failed_cells: failed,
    })
}
