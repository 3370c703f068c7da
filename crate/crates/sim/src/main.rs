use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use upc_core::finite::RngSpec;
use upc_core::{ReceiverKind, SnrProfile};
use upc_sim::config::load_scenario;
use upc_sim::emit::{emit, Format};
use upc_sim::experiments::{self, parse_list, ExperimentKind, ExperimentSpec, InitialPowers};
use upc_sim::parallel::Runner;
use upc_sim::{Result, SimError};

/// Unified power control for large-system CDMA multiuser detectors.
///
/// Worker threads for Monte Carlo runs default to the number of cores and can
/// be set with UPC_THREADS.
#[derive(Parser)]
#[command(name = "upc", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for stochastic experiments; required by them.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// RNG stream id combined with the seed.
    #[arg(long, global = true, default_value_t = 0)]
    stream: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReceiverArg {
    Mf,
    De,
    Mmse,
    Io,
}

impl From<ReceiverArg> for ReceiverKind {
    fn from(r: ReceiverArg) -> Self {
        match r {
            ReceiverArg::Mf => ReceiverKind::Mf,
            ReceiverArg::De => ReceiverKind::De,
            ReceiverArg::Mmse => ReceiverKind::Mmse,
            ReceiverArg::Io => ReceiverKind::Io,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Large-system multiuser efficiency for an SNR profile.
    Efficiency {
        #[arg(long, value_enum)]
        receiver: ReceiverArg,
        /// Load K / N.
        #[arg(long)]
        alpha: f64,
        /// Comma-separated received SNRs (linear).
        #[arg(long, conflicts_with = "point_mass", required_unless_present = "point_mass")]
        snr: Option<String>,
        /// Every user at this received SNR (linear).
        #[arg(long)]
        point_mass: Option<f64>,
    },
    /// Power control iteration.
    Upc {
        #[command(subcommand)]
        action: UpcAction,
    },
    /// SIR-driven baseline against UPC with a new spreading matrix per symbol.
    Baseline {
        #[command(subcommand)]
        action: BaselineAction,
    },
    /// Finite-size deviation statistics.
    Analysis {
        #[command(subcommand)]
        action: AnalysisAction,
    },
}

#[derive(Subcommand)]
enum UpcAction {
    /// Per-iteration trace.
    Run {
        /// `zero`, `const:<watts>` or a comma-separated list of watts.
        #[arg(long, default_value = "zero")]
        init: String,
    },
}

#[derive(Subcommand)]
enum BaselineAction {
    Run {
        /// Symbol intervals to simulate.
        #[arg(long)]
        symbols: usize,
    },
}

#[derive(Subcommand)]
enum AnalysisAction {
    /// Probability of staying within Δ dB of the target on the standard grid.
    Table1 {
        #[arg(long, default_value_t = 6.4)]
        gamma_star: f64,
        #[arg(long, default_value_t = 1.0)]
        delta_db: f64,
        /// Trials per cell; 100000 for N <= 64 and 10000 above when omitted.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Empirical and approximate SIR CDF.
    Cdf {
        /// Spreading matrices to draw.
        #[arg(long)]
        trials: usize,
        /// Grid points of the output curve.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
}

fn require_seed(global: &Global) -> Result<RngSpec> {
    global
        .seed
        .map(|seed| RngSpec::new(seed, global.stream))
        .ok_or_else(|| SimError::Usage("--seed is required for stochastic experiments".into()))
}

fn require_scenario(global: &Global) -> Result<upc_core::Scenario> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| SimError::Usage("--config is required".into()))?;
    load_scenario(path)
}

/// 12 significant digits in plain decimal; the solvers are not more
/// accurate than that.
fn decimal(x: f64) -> String {
    let magnitude = if x > 0.0 { x.log10().floor() as i32 } else { 0 };
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let kind = match cli.command {
        Command::Efficiency {
            receiver,
            alpha,
            snr,
            point_mass,
        } => {
            let profile = match (snr, point_mass) {
                (Some(list), _) => SnrProfile::new(
                    parse_list(&list).map_err(|e| SimError::Usage(format!("bad --snr list: {e}")))?,
                )?,
                (None, Some(g)) => SnrProfile::point_mass(g, 1)?,
                (None, None) => return Err(SimError::Usage("give --snr or --point-mass".into())),
            };
            let table = experiments::efficiency_query(receiver.into(), alpha, &profile)?;
            if g.out.is_some() || matches!(g.format, FormatArg::Json) {
                return emit(&table, g.format.into(), g.out.as_deref());
            }
            let eta = match table.rows[0][3] {
                upc_sim::emit::Cell::Num(x) => x,
                _ => unreachable!("efficiency column is numeric"),
            };
            println!("{}", decimal(eta));
            return Ok(());
        }
        Command::Upc {
            action: UpcAction::Run { init },
        } => ExperimentKind::UpcTrace {
            scenario: require_scenario(g)?,
            initial: init.parse::<InitialPowers>()?,
        },
        Command::Baseline {
            action: BaselineAction::Run { symbols },
        } => ExperimentKind::BaselineCompare {
            rng: require_seed(g)?,
            scenario: require_scenario(g)?,
            symbols,
        },
        Command::Analysis {
            action:
                AnalysisAction::Table1 {
                    gamma_star,
                    delta_db,
                    trials,
                },
        } => ExperimentKind::table1(gamma_star, delta_db, trials, require_seed(g)?),
        Command::Analysis {
            action: AnalysisAction::Cdf { trials, points },
        } => ExperimentKind::Cdf {
            rng: require_seed(g)?,
            scenario: require_scenario(g)?,
            trials,
            points,
        },
    };
    let spec = ExperimentSpec {
        kind,
        out: g.out.clone(),
        format: g.format.into(),
    };
    experiments::run_experiment(&spec, &Runner::from_env()?).map(|_| ())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
