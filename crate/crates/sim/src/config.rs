//! Scenario configuration files.
//!
//! ```json
//! {
//!   "num_users": 8,
//!   "processing_gain": 32,
//!   "noise_power_watts": 1.6e-14,
//!   "target_sir_linear": 6.4,
//!   "receiver": "mmse",
//!   "distance_model": { "base_m": 100, "step_m": 10, "constant": 0.1, "exponent": 4 }
//! }
//! ```
//!
//! Exactly one of `gains` and `distance_model` must be present. The JSON
//! schema lives in `docs/scenario.schema.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use upc_core::scenario::DistanceModel;
use upc_core::{ReceiverKind, Scenario};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Mf,
    De,
    Mmse,
    Io,
}

impl From<Receiver> for ReceiverKind {
    fn from(r: Receiver) -> Self {
        match r {
            Receiver::Mf => ReceiverKind::Mf,
            Receiver::De => ReceiverKind::De,
            Receiver::Mmse => ReceiverKind::Mmse,
            Receiver::Io => ReceiverKind::Io,
        }
    }
}

impl From<ReceiverKind> for Receiver {
    fn from(r: ReceiverKind) -> Self {
        match r {
            ReceiverKind::Mf => Receiver::Mf,
            ReceiverKind::De => Receiver::De,
            ReceiverKind::Mmse => Receiver::Mmse,
            ReceiverKind::Io => Receiver::Io,
        }
    }
}

/// One target for everybody, or one per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSir {
    Common(f64),
    PerUser(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceModelConfig {
    pub base_m: f64,
    pub step_m: f64,
    pub constant: f64,
    pub exponent: f64,
}

impl Default for DistanceModelConfig {
    fn default() -> Self {
        let m = DistanceModel::default();
        DistanceModelConfig {
            base_m: m.base_m,
            step_m: m.step_m,
            constant: m.constant,
            exponent: m.exponent,
        }
    }
}

impl From<DistanceModelConfig> for DistanceModel {
    fn from(c: DistanceModelConfig) -> Self {
        DistanceModel {
            base_m: c.base_m,
            step_m: c.step_m,
            constant: c.constant,
            exponent: c.exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_users: usize,
    pub processing_gain: usize,
    pub noise_power_watts: f64,
    pub target_sir_linear: TargetSir,
    pub receiver: Receiver,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_model: Option<DistanceModelConfig>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::config(None, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text).map_err(|e| with_path(e, path))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration values always serialize")
    }
}

fn with_path(err: SimError, path: &Path) -> SimError {
    match err {
        SimError::Config { message, .. } => SimError::config(Some(PathBuf::from(path)), message),
        other => other,
    }
}

/// Validates a configuration and turns it into a [`Scenario`].
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let fail = |msg: String| SimError::config(None, msg);
    if config.num_users == 0 {
        return Err(fail("num_users must be at least 1".into()));
    }
    let gains = match (&config.gains, &config.distance_model) {
        (Some(g), None) => {
            if g.len() != config.num_users {
                return Err(fail(format!(
                    "{} gains given for num_users = {}",
                    g.len(),
                    config.num_users
                )));
            }
            g.clone()
        }
        (None, Some(model)) => DistanceModel::from(*model)
            .gains(config.num_users)
            .map_err(|e| fail(e.to_string()))?,
        (Some(_), Some(_)) => return Err(fail("give either gains or distance_model, not both".into())),
        (None, None) => return Err(fail("one of gains or distance_model is required".into())),
    };
    let targets = match &config.target_sir_linear {
        TargetSir::Common(g) => vec![*g; config.num_users],
        TargetSir::PerUser(t) => {
            if t.len() != config.num_users {
                return Err(fail(format!(
                    "{} target SIRs given for num_users = {}",
                    t.len(),
                    config.num_users
                )));
            }
            t.clone()
        }
    };
    Scenario::new(
        config.processing_gain,
        config.noise_power_watts,
        gains,
        targets,
        config.receiver.into(),
    )
    .map_err(|e| fail(e.to_string()))
}

/// [`build_scenario`] for a configuration file, with the path in any error.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    build_scenario(&ScenarioConfig::load(path)?).map_err(|e| with_path(e, path))
}

/// Explicit-gain configuration describing `scenario`.
pub fn from_scenario(scenario: &Scenario) -> ScenarioConfig {
    let target_sir_linear = match scenario.common_target() {
        Some(g) => TargetSir::Common(g),
        None => TargetSir::PerUser(scenario.target_sirs().to_vec()),
    };
    ScenarioConfig {
        num_users: scenario.num_users(),
        processing_gain: scenario.processing_gain(),
        noise_power_watts: scenario.noise_power(),
        target_sir_linear,
        receiver: scenario.receiver().into(),
        gains: Some(scenario.channel_gains().to_vec()),
        distance_model: None,
    }
}
