//! Finite-size ground truth with random binary spreading.
//!
//! SIR formulas take the spreading matrix explicitly, so they capture the
//! per-realization fluctuations that the large-system efficiency averages
//! out. Users are indexed from zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::Cholesky;
use crate::scenario::{snr_from_power, PowerVector, ReceiverKind, Scenario};
use crate::special::norm_sf;
use crate::{Error, Result};

/// Gram matrices with a larger condition estimate are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Seed and stream of a reproducible random source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Independent stream for trial `index`; trials can be evaluated in any
    /// order or in parallel.
    pub fn trial(&self, index: u64) -> RngSpec {
        RngSpec {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id)),
            stream_id: index,
        }
    }
}

/// `N × K` matrix of chips `±1/√N`, stored as packed sign bits per column
/// (bit set means `−1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadingMatrix {
    chips: usize,
    users: usize,
    words: usize,
    bits: Vec<u64>,
}

impl SpreadingMatrix {
    fn check_dims(chips: usize, users: usize) -> Result<()> {
        if chips == 0 || users == 0 {
            return Err(Error::invalid("spreading matrix needs N >= 1 and K >= 1"));
        }
        Ok(())
    }

    /// Equiprobable independent chips.
    pub fn sample<R: RngCore + ?Sized>(users: usize, chips: usize, rng: &mut R) -> Result<Self> {
        Self::check_dims(chips, users)?;
        let words = chips.div_ceil(64);
        let tail = chips % 64;
        let mask = if tail == 0 { u64::MAX } else { (1u64 << tail) - 1 };
        let mut bits = vec![0u64; words * users];
        for col in bits.chunks_exact_mut(words) {
            for w in col.iter_mut() {
                *w = rng.next_u64();
            }
            col[words - 1] &= mask;
        }
        Ok(SpreadingMatrix {
            chips,
            users,
            words,
            bits,
        })
    }

    /// From column-major signs (`+1` or `−1`).
    pub fn from_signs(chips: usize, users: usize, signs: &[i8]) -> Result<Self> {
        Self::check_dims(chips, users)?;
        if signs.len() != chips * users {
            return Err(Error::invalid(format!(
                "expected {} signs, got {}",
                chips * users,
                signs.len()
            )));
        }
        let words = chips.div_ceil(64);
        let mut bits = vec![0u64; words * users];
        for (k, column) in signs.chunks_exact(chips).enumerate() {
            for (i, s) in column.iter().enumerate() {
                match s {
                    1 => {}
                    -1 => bits[k * words + i / 64] |= 1 << (i % 64),
                    other => return Err(Error::invalid(format!("chip signs must be ±1, got {other}"))),
                }
            }
        }
        Ok(SpreadingMatrix {
            chips,
            users,
            words,
            bits,
        })
    }

    /// Processing gain `N`.
    pub fn chips(&self) -> usize {
        self.chips
    }

    /// User count `K`.
    pub fn users(&self) -> usize {
        self.users
    }

    fn col_bits(&self, k: usize) -> &[u64] {
        &self.bits[k * self.words..(k + 1) * self.words]
    }

    pub fn sign(&self, chip: usize, user: usize) -> i8 {
        if self.col_bits(user)[chip / 64] >> (chip % 64) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn entry(&self, chip: usize, user: usize) -> f64 {
        f64::from(self.sign(chip, user)) / libm::sqrt(self.chips as f64)
    }

    pub fn column(&self, user: usize) -> Vec<f64> {
        (0..self.chips).map(|i| self.entry(i, user)).collect()
    }

    /// `s_jᵀ s_k`, exact: `(N − 2 · #disagreements) / N`.
    pub fn correlation(&self, j: usize, k: usize) -> f64 {
        let disagree: u32 = self
            .col_bits(j)
            .iter()
            .zip(self.col_bits(k))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        (self.chips as f64 - 2.0 * f64::from(disagree)) / self.chips as f64
    }

    /// Row-major `K × K` matrix `SᵀS`.
    pub fn gram(&self) -> Vec<f64> {
        let k = self.users;
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            g[i * k + i] = 1.0;
            for j in 0..i {
                let c = self.correlation(i, j);
                g[i * k + j] = c;
                g[j * k + i] = c;
            }
        }
        g
    }

    fn check_user(&self, k: usize) -> Result<()> {
        if k >= self.users {
            return Err(Error::invalid(format!(
                "user index {k} out of range for {} users",
                self.users
            )));
        }
        Ok(())
    }

    fn check_snr(&self, snr: &[f64]) -> Result<()> {
        if snr.len() != self.users {
            return Err(Error::invalid(format!(
                "{} SNRs given for a matrix with {} users",
                snr.len(),
                self.users
            )));
        }
        Ok(())
    }
}

/// Draws a spreading matrix from the stream described by `rng`.
pub fn random_spreading(users: usize, chips: usize, rng: &RngSpec) -> Result<SpreadingMatrix> {
    SpreadingMatrix::sample(users, chips, &mut rng.rng())
}

/// Matched filter output SIR of user `k` given received SNRs:
/// `Γ_k / (1 + Σ_{j≠k} Γ_j (s_kᵀ s_j)²)`.
pub fn sir_mf_snr(s: &SpreadingMatrix, snr: &[f64], k: usize) -> Result<f64> {
    s.check_snr(snr)?;
    s.check_user(k)?;
    let interference: f64 = (0..s.users())
        .filter(|&j| j != k)
        .map(|j| {
            let c = s.correlation(k, j);
            snr[j] * c * c
        })
        .sum();
    Ok(snr[k] / (1.0 + interference))
}

/// Decorrelator output SIR of user `k`: `Γ_k / [(SᵀS)⁻¹]_kk`.
///
/// The Gram matrix is factored with user `k` ordered last, so that
/// `1 / [(SᵀS)⁻¹]_kk` is the square of the last Cholesky pivot.
pub fn sir_de_snr(s: &SpreadingMatrix, snr: &[f64], k: usize) -> Result<f64> {
    s.check_snr(snr)?;
    s.check_user(k)?;
    Ok(snr[k] * de_noise_factor(s, k)?)
}

/// `1 / [(SᵀS)⁻¹]_kk`, in `(0, 1]`.
pub fn de_noise_factor(s: &SpreadingMatrix, k: usize) -> Result<f64> {
    s.check_user(k)?;
    let users = s.users();
    if users > s.chips() {
        return Err(Error::invalid(format!(
            "decorrelator needs K <= N, got K = {users}, N = {}",
            s.chips()
        )));
    }
    let order: Vec<usize> = (0..users)
        .filter(|&j| j != k)
        .chain(core::iter::once(k))
        .collect();
    let mut g = vec![0.0; users * users];
    for (a, &i) in order.iter().enumerate() {
        g[a * users + a] = 1.0;
        for (b, &j) in order[..a].iter().enumerate() {
            g[a * users + b] = s.correlation(i, j);
        }
    }
    let chol = Cholesky::factor(g, users).ok_or(Error::Singular {
        condition_estimate: f64::INFINITY,
    })?;
    let condition_estimate = chol.condition_estimate();
    if !(condition_estimate <= MAX_CONDITION) {
        return Err(Error::Singular { condition_estimate });
    }
    let last = chol.diag(users - 1);
    Ok(last * last)
}

/// Linear MMSE output SIR of user `k`: `Γ_k s_kᵀ A_k⁻¹ s_k` with
/// `A_k = I + Σ_{j≠k} Γ_j s_j s_jᵀ` (noise-normalised).
///
/// With fewer interferers than chips the quadratic form is evaluated through
/// the `(K−1)`-dimensional capacitance system
/// `s_kᵀ A_k⁻¹ s_k = 1 − bᵀ (D⁻¹ + S_Jᵀ S_J)⁻¹ b`, `b = S_Jᵀ s_k`, which only
/// needs chip correlations. Otherwise `A_k x = s_k` is solved directly.
pub fn sir_mmse_snr(s: &SpreadingMatrix, snr: &[f64], k: usize) -> Result<f64> {
    s.check_snr(snr)?;
    s.check_user(k)?;
    let interferers: Vec<usize> = (0..s.users()).filter(|&j| j != k && snr[j] > 0.0).collect();
    let quad = if interferers.len() < s.chips() {
        mmse_quadratic_capacitance(s, snr, k, &interferers)?
    } else {
        mmse_quadratic_direct(s, snr, k, &interferers)?
    };
    Ok(snr[k] * quad)
}

fn mmse_quadratic_capacitance(
    s: &SpreadingMatrix,
    snr: &[f64],
    k: usize,
    interferers: &[usize],
) -> Result<f64> {
    let m = interferers.len();
    if m == 0 {
        return Ok(1.0);
    }
    let mut cap = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (a, &i) in interferers.iter().enumerate() {
        cap[a * m + a] = 1.0 + 1.0 / snr[i];
        b[a] = s.correlation(i, k);
        for (c, &j) in interferers[..a].iter().enumerate() {
            cap[a * m + c] = s.correlation(i, j);
        }
    }
    let chol = Cholesky::factor(cap, m).ok_or(Error::Singular {
        condition_estimate: f64::INFINITY,
    })?;
    Ok((1.0 - chol.inverse_quadratic_form(&b)).max(0.0))
}

fn mmse_quadratic_direct(s: &SpreadingMatrix, snr: &[f64], k: usize, interferers: &[usize]) -> Result<f64> {
    let n = s.chips();
    let columns: Vec<Vec<f64>> = interferers.iter().map(|&j| s.column(j)).collect();
    let mut a = vec![0.0; n * n];
    for r in 0..n {
        a[r * n + r] = 1.0;
    }
    for (col, &j) in columns.iter().zip(interferers) {
        let w = snr[j];
        for r in 0..n {
            let scaled = w * col[r];
            for (c, entry) in a[r * n..r * n + r + 1].iter_mut().enumerate() {
                *entry += scaled * col[c];
            }
        }
    }
    let chol = Cholesky::factor(a, n).ok_or(Error::Singular {
        condition_estimate: f64::INFINITY,
    })?;
    let sk = s.column(k);
    Ok(chol.inverse_quadratic_form(&sk))
}

/// Exact output SIR for a linear receiver. The individually optimal detector
/// has no closed-form SIR and is rejected.
pub fn exact_sir_snr(receiver: ReceiverKind, s: &SpreadingMatrix, snr: &[f64], k: usize) -> Result<f64> {
    match receiver {
        ReceiverKind::Mf => sir_mf_snr(s, snr, k),
        ReceiverKind::De => sir_de_snr(s, snr, k),
        ReceiverKind::Mmse => sir_mmse_snr(s, snr, k),
        ReceiverKind::Io => Err(Error::unsupported(
            "no closed-form output SIR for the individually optimal detector",
        )),
    }
}

/// Exact output SIRs of every user.
pub fn exact_sirs_snr(receiver: ReceiverKind, s: &SpreadingMatrix, snr: &[f64]) -> Result<Vec<f64>> {
    (0..s.users())
        .map(|k| exact_sir_snr(receiver, s, snr, k))
        .collect()
}

fn check_matrix(s: &SpreadingMatrix, scenario: &Scenario) -> Result<()> {
    if s.users() != scenario.num_users() || s.chips() != scenario.processing_gain() {
        return Err(Error::invalid(format!(
            "spreading matrix is {}x{} but the scenario has N = {}, K = {}",
            s.chips(),
            s.users(),
            scenario.processing_gain(),
            scenario.num_users()
        )));
    }
    Ok(())
}

/// Matched filter SIR from transmit powers.
pub fn sir_mf(s: &SpreadingMatrix, p: &PowerVector, scenario: &Scenario, k: usize) -> Result<f64> {
    check_matrix(s, scenario)?;
    sir_mf_snr(s, snr_from_power(p, scenario)?.as_slice(), k)
}

/// Decorrelator SIR from transmit powers.
pub fn sir_de(s: &SpreadingMatrix, p: &PowerVector, scenario: &Scenario, k: usize) -> Result<f64> {
    check_matrix(s, scenario)?;
    sir_de_snr(s, snr_from_power(p, scenario)?.as_slice(), k)
}

/// Linear MMSE SIR from transmit powers.
pub fn sir_mmse(s: &SpreadingMatrix, p: &PowerVector, scenario: &Scenario, k: usize) -> Result<f64> {
    check_matrix(s, scenario)?;
    sir_mmse_snr(s, snr_from_power(p, scenario)?.as_slice(), k)
}

/// SIR-driven update `p_k ← (γ*_k / γ_k) p_k`.
pub fn sir_based_update(p: &PowerVector, measured_sirs: &[f64], targets: &[f64]) -> Result<PowerVector> {
    if measured_sirs.len() != p.len() || targets.len() != p.len() {
        return Err(Error::invalid(
            "powers, measured SIRs and targets differ in length",
        ));
    }
    if let Some(bad) = measured_sirs.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::invalid(format!(
            "measured SIRs must be positive, got {bad}"
        )));
    }
    PowerVector::new(
        p.as_slice()
            .iter()
            .zip(measured_sirs)
            .zip(targets)
            .map(|((p, g), t)| t / g * p)
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub powers: PowerVector,
    pub sirs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates the SIR-driven update on a fixed spreading matrix until every
/// user's SIR is within `sir_tolerance_rel` of its target.
pub fn sir_based_iteration(
    scenario: &Scenario,
    s: &SpreadingMatrix,
    initial: &PowerVector,
    max_iterations: usize,
    sir_tolerance_rel: f64,
) -> Result<BaselineOutcome> {
    check_matrix(s, scenario)?;
    let targets = scenario.target_sirs();
    let mut powers = initial.clone();
    let mut iterations = 0;
    loop {
        let snr = snr_from_power(&powers, scenario)?;
        let sirs = exact_sirs_snr(scenario.receiver(), s, snr.as_slice())?;
        let worst = sirs
            .iter()
            .zip(targets)
            .map(|(g, t)| ((g - t) / t).abs())
            .fold(0.0, f64::max);
        if worst < sir_tolerance_rel || iterations == max_iterations {
            return Ok(BaselineOutcome {
                powers,
                sirs,
                iterations,
                converged: worst < sir_tolerance_rel,
            });
        }
        powers = sir_based_update(&powers, &sirs, targets)?;
        iterations += 1;
    }
}

/// Bit error rate of BPSK in Gaussian noise and interference, `Q(√γ)`.
pub fn ber_from_sir(gamma: f64) -> f64 {
    norm_sf(libm::sqrt(gamma.max(0.0)))
}
