//! System configuration and SNR bookkeeping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Detector used at the uplink receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverKind {
    /// Conventional matched filter.
    Mf,
    /// Decorrelating detector.
    De,
    /// Linear minimum mean-square-error detector.
    Mmse,
    /// Individually optimal detector (binary inputs).
    Io,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 4] = [
        ReceiverKind::Mf,
        ReceiverKind::De,
        ReceiverKind::Mmse,
        ReceiverKind::Io,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReceiverKind::Mf => "mf",
            ReceiverKind::De => "de",
            ReceiverKind::Mmse => "mmse",
            ReceiverKind::Io => "io",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" => Ok(ReceiverKind::Mf),
            "de" => Ok(ReceiverKind::De),
            "mmse" => Ok(ReceiverKind::Mmse),
            "io" => Ok(ReceiverKind::Io),
            other => Err(Error::invalid(format!(
                "unknown receiver `{other}` (expected mf, de, mmse or io)"
            ))),
        }
    }
}

/// Path-loss gain `constant * distance^-exponent`.
pub fn channel_gain(distance_m: f64, path_loss_constant: f64, path_loss_exponent: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::invalid(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    Ok(path_loss_constant * libm::pow(distance_m, -path_loss_exponent))
}

/// Users sit on a line: user `k` (1-based) is at `base_m + step_m * k` metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceModel {
    pub base_m: f64,
    pub step_m: f64,
    pub constant: f64,
    pub exponent: f64,
}

impl Default for DistanceModel {
    fn default() -> Self {
        DistanceModel {
            base_m: 100.0,
            step_m: 10.0,
            constant: 0.1,
            exponent: 4.0,
        }
    }
}

impl DistanceModel {
    pub fn distance(&self, user: usize) -> f64 {
        self.base_m + self.step_m * (user + 1) as f64
    }

    /// Gains for users `0..num_users`.
    pub fn gains(&self, num_users: usize) -> Result<Vec<f64>> {
        (0..num_users)
            .map(|k| channel_gain(self.distance(k), self.constant, self.exponent))
            .collect()
    }
}

/// Received SNRs `Γ_k = p_k h_k / σ²`, one per user.
///
/// The profile doubles as the empirical SNR distribution: every expectation
/// over `Γ` is a sample mean over its entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrProfile(Vec<f64>);

impl SnrProfile {
    pub fn new(snr: Vec<f64>) -> Result<Self> {
        if let Some(bad) = snr.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return Err(Error::invalid(format!(
                "SNR entries must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(SnrProfile(snr))
    }

    /// `num_users` identical entries.
    pub fn point_mass(snr: f64, num_users: usize) -> Result<Self> {
        Self::new(vec![snr; num_users])
    }

    pub fn zeros(num_users: usize) -> Self {
        SnrProfile(vec![0.0; num_users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn scaled(&self, theta: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|g| g * theta).collect())
    }

    /// Element-wise `self >= other`.
    pub fn dominates(&self, other: &SnrProfile) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

/// Transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if let Some(bad) = powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!(
                "powers must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(PowerVector(powers))
    }

    pub fn zeros(num_users: usize) -> Self {
        PowerVector(vec![0.0; num_users])
    }

    pub fn constant(power: f64, num_users: usize) -> Result<Self> {
        Self::new(vec![power; num_users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, theta: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|p| p * theta).collect())
    }
}

/// A single-cell synchronous CDMA uplink.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    processing_gain: usize,
    noise_power: f64,
    channel_gains: Vec<f64>,
    target_sirs: Vec<f64>,
    receiver: ReceiverKind,
}

impl Scenario {
    /// The user count is taken from `channel_gains`; `target_sirs` must have
    /// the same length.
    pub fn new(
        processing_gain: usize,
        noise_power: f64,
        channel_gains: Vec<f64>,
        target_sirs: Vec<f64>,
        receiver: ReceiverKind,
    ) -> Result<Self> {
        if channel_gains.is_empty() {
            return Err(Error::invalid("a scenario needs at least one user"));
        }
        if processing_gain == 0 {
            return Err(Error::invalid("processing gain must be at least 1"));
        }
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(Error::invalid(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if target_sirs.len() != channel_gains.len() {
            return Err(Error::invalid(format!(
                "{} target SIRs given for {} users",
                target_sirs.len(),
                channel_gains.len()
            )));
        }
        if let Some(h) = channel_gains.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::invalid(format!("channel gains must be positive, got {h}")));
        }
        if let Some(g) = target_sirs.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid(format!("target SIRs must be positive, got {g}")));
        }
        Ok(Scenario {
            processing_gain,
            noise_power,
            channel_gains,
            target_sirs,
            receiver,
        })
    }

    /// Same target for every user.
    pub fn with_common_target(
        processing_gain: usize,
        noise_power: f64,
        channel_gains: Vec<f64>,
        target_sir: f64,
        receiver: ReceiverKind,
    ) -> Result<Self> {
        let targets = vec![target_sir; channel_gains.len()];
        Self::new(processing_gain, noise_power, channel_gains, targets, receiver)
    }

    /// `num_users` users with unit gains and unit noise, so powers equal SNRs.
    pub fn normalized(
        num_users: usize,
        processing_gain: usize,
        target_sir: f64,
        receiver: ReceiverKind,
    ) -> Result<Self> {
        Self::with_common_target(processing_gain, 1.0, vec![1.0; num_users], target_sir, receiver)
    }

    pub fn num_users(&self) -> usize {
        self.channel_gains.len()
    }

    pub fn processing_gain(&self) -> usize {
        self.processing_gain
    }

    /// System load `K / N`.
    pub fn load(&self) -> f64 {
        self.num_users() as f64 / self.processing_gain as f64
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn channel_gains(&self) -> &[f64] {
        &self.channel_gains
    }

    pub fn target_sirs(&self) -> &[f64] {
        &self.target_sirs
    }

    pub fn receiver(&self) -> ReceiverKind {
        self.receiver
    }

    pub fn max_target(&self) -> f64 {
        self.target_sirs.iter().copied().fold(0.0, f64::max)
    }

    /// The common target, if all users share one.
    pub fn common_target(&self) -> Option<f64> {
        let first = self.target_sirs[0];
        self.target_sirs.iter().all(|g| *g == first).then_some(first)
    }

    pub fn with_receiver(&self, receiver: ReceiverKind) -> Self {
        Scenario {
            receiver,
            ..self.clone()
        }
    }

    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        Self::new(
            self.processing_gain,
            noise_power,
            self.channel_gains.clone(),
            self.target_sirs.clone(),
            self.receiver,
        )
    }

    /// Inverse of [`snr_from_power`]: `p_k = Γ_k σ² / h_k`.
    pub fn powers_for_snr(&self, snr: &SnrProfile) -> Result<PowerVector> {
        self.check_len(snr.len())?;
        PowerVector::new(
            snr.as_slice()
                .iter()
                .zip(&self.channel_gains)
                .map(|(g, h)| g * self.noise_power / h)
                .collect(),
        )
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_users() {
            return Err(Error::invalid(format!(
                "vector of length {len} does not match {} users",
                self.num_users()
            )));
        }
        Ok(())
    }
}

/// Received SNRs `Γ_k = p_k h_k / σ²`.
pub fn snr_from_power(powers: &PowerVector, scenario: &Scenario) -> Result<SnrProfile> {
    scenario.check_len(powers.len())?;
    SnrProfile::new(
        powers
            .as_slice()
            .iter()
            .zip(scenario.channel_gains())
            .map(|(p, h)| p * h / scenario.noise_power())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gain_from_distance() {
        assert!(rel(channel_gain(110.0, 0.1, 4.0).unwrap(), 6.83013e-10) < 1e-5);
        assert_eq!(channel_gain(1.0, 1.0, 4.0).unwrap(), 1.0);
        assert!(rel(channel_gain(180.0, 0.1, 4.0).unwrap(), 9.52599e-11) < 1e-5);
        assert!(channel_gain(0.0, 0.1, 4.0).is_err());
        assert!(channel_gain(-5.0, 0.1, 4.0).is_err());
    }

    #[test]
    fn default_distance_model() {
        let gains = DistanceModel::default().gains(8).unwrap();
        assert_eq!(gains.len(), 8);
        assert!(rel(gains[0], 0.1 / 110f64.powi(4)) < 1e-14);
        assert!(rel(gains[7], 0.1 / 180f64.powi(4)) < 1e-14);
    }

    fn paper_scenario() -> Scenario {
        Scenario::with_common_target(
            32,
            1.6e-14,
            DistanceModel::default().gains(8).unwrap(),
            6.4,
            ReceiverKind::De,
        )
        .unwrap()
    }

    #[test]
    fn snr_bookkeeping() {
        let s = paper_scenario();
        assert_eq!(s.load(), 0.25);
        let zero = snr_from_power(&PowerVector::zeros(8), &s).unwrap();
        assert!(zero.as_slice().iter().all(|g| *g == 0.0));

        // p_1 at the decorrelator steady state gives Γ_1 = γ*/(1−α).
        let p1 = 6.4 * 1.6e-14 / (0.75 * s.channel_gains()[0]);
        let p = PowerVector::constant(p1, 8).unwrap();
        let snr = snr_from_power(&p, &s).unwrap();
        assert!(rel(snr.as_slice()[0], 8.533333333333333) < 1e-12);

        assert!(snr_from_power(&PowerVector::zeros(3), &s).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::normalized(0, 32, 6.4, ReceiverKind::De).is_err());
        assert!(Scenario::normalized(2, 0, 6.4, ReceiverKind::De).is_err());
        assert!(Scenario::with_common_target(4, 0.0, vec![1.0], 1.0, ReceiverKind::Mf).is_err());
        assert!(Scenario::with_common_target(4, 1.0, vec![1.0, -1.0], 1.0, ReceiverKind::Mf).is_err());
        assert!(Scenario::new(4, 1.0, vec![1.0, 1.0], vec![1.0], ReceiverKind::Mf).is_err());
        assert!(Scenario::with_common_target(4, 1.0, vec![1.0], 0.0, ReceiverKind::Mf).is_err());
        let s = Scenario::with_common_target(4, 1.0, vec![1.0, 1.0], 2.0, ReceiverKind::Mmse).unwrap();
        assert_eq!(s.channel_gains(), &[1.0, 1.0]);
        assert_eq!(s.common_target(), Some(2.0));
    }

    #[test]
    fn receiver_names_round_trip() {
        for kind in ReceiverKind::ALL {
            assert_eq!(kind.as_str().parse::<ReceiverKind>().unwrap(), kind);
        }
        assert!("ml".parse::<ReceiverKind>().is_err());
    }

    proptest! {
        #[test]
        fn snr_is_linear_in_power(
            powers in proptest::collection::vec(0.0f64..1e-2, 8),
            theta in 0.0f64..100.0,
        ) {
            let s = paper_scenario();
            let p = PowerVector::new(powers).unwrap();
            let base = snr_from_power(&p, &s).unwrap();
            let scaled = snr_from_power(&p.scaled(theta).unwrap(), &s).unwrap();
            for (a, b) in base.as_slice().iter().zip(scaled.as_slice()) {
                prop_assert!((a * theta - b).abs() <= 1e-12 * b.abs().max(1e-300));
            }
            let back = s.powers_for_snr(&base).unwrap();
            for (a, b) in back.as_slice().iter().zip(p.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }
}
