//! Multithreaded Monte Carlo on top of the sequential core estimators.
//!
//! Trials are cut into fixed-size chunks independent of the worker count, and
//! each trial has its own RNG stream, so results are identical for any
//! number of threads.

use rayon::prelude::*;
use upc_core::analysis::{MonteCarloReport, MonteCarloSetup, TrialCounts};
use upc_core::finite::RngSpec;
use upc_core::Scenario;

use crate::error::{Result, SimError};

/// Overrides the worker count.
pub const THREADS_ENV: &str = "UPC_THREADS";

const CHUNK: u64 = 2048;

/// Worker count from [`THREADS_ENV`], or the number of available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(SimError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| SimError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Runner { pool })
    }

    pub fn from_env() -> Result<Self> {
        Self::new(worker_count()?)
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn chunks(trials: usize) -> Vec<std::ops::Range<u64>> {
        let trials = trials as u64;
        (0..trials.div_ceil(CHUNK))
            .map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials))
            .collect()
    }

    /// Same result as [`upc_core::analysis::monte_carlo_p_delta`].
    pub fn p_delta(
        &self,
        scenario: &Scenario,
        delta_db: f64,
        trials: usize,
        rng: RngSpec,
    ) -> Result<MonteCarloReport> {
        if trials == 0 {
            return Err(SimError::Usage("trials must be at least 1".into()));
        }
        let setup = MonteCarloSetup::new(scenario, delta_db)?;
        let counts = self.pool.install(|| {
            Self::chunks(trials)
                .into_par_iter()
                .map(|range| setup.count_in_band(&rng, range))
                .collect::<upc_core::Result<Vec<TrialCounts>>>()
        })?;
        let total = counts.into_iter().fold(TrialCounts::default(), |a, b| a + b);
        Ok(MonteCarloReport::from_counts(total, trials, rng))
    }

    /// Measured-user SIR samples in trial order, plus the rejected-draw count.
    pub fn samples(&self, scenario: &Scenario, trials: usize, rng: RngSpec) -> Result<(Vec<f64>, u64)> {
        if trials == 0 {
            return Err(SimError::Usage("trials must be at least 1".into()));
        }
        // The band is irrelevant for sampling.
        let setup = MonteCarloSetup::new(scenario, 1.0)?;
        let parts = self.pool.install(|| {
            Self::chunks(trials)
                .into_par_iter()
                .map(|range| setup.sample_range(&rng, range))
                .collect::<upc_core::Result<Vec<_>>>()
        })?;
        let mut samples = Vec::with_capacity(trials);
        let mut rejected = 0;
        for (s, r) in parts {
            samples.extend(s);
            rejected += r;
        }
        Ok((samples, rejected))
    }
}
