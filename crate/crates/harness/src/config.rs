//! Scenario configuration: TOML or JSON files, CLI overrides and derived model parameters.

use std::path::Path;

use darap_core::model::{last_stage_weights, ModelParams, ObservabilityMask};
use darap_core::ModelParams64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Physical and dynamic model. Defaults are the reference parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_cells: usize,
    pub prior_prob: f64,
    pub amp_mean: f64,
    pub amp_std: f64,
    pub amp_walk_std: f64,
    pub noise_var: f64,
    pub stay_prob: f64,
    pub death_prob: f64,
    pub birth_prob: f64,
    pub neighbor_count: usize,
    pub horizon: usize,
    /// Explicit per-stage budgets; when absent they follow from `snr_db`.
    pub budgets: Option<Vec<f64>>,
    /// Stage weights; last-stage weighting when absent.
    pub stage_weights: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let p = ModelParams64::table_one(20, 1.0);
        Self {
            num_cells: p.num_cells,
            prior_prob: p.prior_prob,
            amp_mean: p.amp_mean,
            amp_std: p.amp_std,
            amp_walk_std: p.amp_walk_std,
            noise_var: p.noise_var,
            stay_prob: p.stay_prob,
            death_prob: p.death_prob,
            birth_prob: p.birth_prob,
            neighbor_count: p.neighbor_count,
            horizon: p.horizon,
            budgets: None,
            stage_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Uniform,
    Myopic,
    Darap { kappas: Vec<f64> },
    OfflineRollout { t0: usize },
    MyopicPlus { rho: f64 },
    OnlineRollout { t0: usize },
    Omniscient,
    SemiOmniscient,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Myopic => "myopic",
            Self::Darap { .. } => "darap",
            Self::OfflineRollout { .. } => "offline_rollout",
            Self::MyopicPlus { .. } => "myopic_plus",
            Self::OnlineRollout { .. } => "online_rollout",
            Self::Omniscient => "omniscient",
            Self::SemiOmniscient => "semi_omniscient",
        }
    }

    /// Parses a CLI policy name; parameterised policies take their defaults.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "uniform" => Self::Uniform,
            "myopic" => Self::Myopic,
            "darap" => Self::Darap { kappas: Vec::new() },
            "offline_rollout" => Self::OfflineRollout { t0: 5 },
            "myopic_plus" => Self::MyopicPlus { rho: darap_core::policy::DEFAULT_RHO },
            "online_rollout" => Self::OnlineRollout { t0: 5 },
            "omniscient" => Self::Omniscient,
            "semi_omniscient" => Self::SemiOmniscient,
            other => return Err(HarnessError::Usage(format!("unknown policy `{other}`"))),
        })
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, Self::Omniscient | Self::SemiOmniscient)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Standard,
    /// True amplitudes are pinned to `theta0` while the filter keeps its prior.
    Mismatch { theta0: f64 },
    /// Periodic sensor outage starting with `on` observed stages.
    Missing {
        #[serde(default = "default_on")]
        on: usize,
        #[serde(default = "default_off")]
        off: usize,
    },
}

fn default_on() -> usize {
    6
}

fn default_off() -> usize {
    3
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Mismatch { .. } => "mismatch",
            Self::Missing { .. } => "missing",
        }
    }

    pub fn from_name(name: &str, theta0: Option<f64>) -> Result<Self> {
        Ok(match name {
            "standard" => Self::Standard,
            "mismatch" => Self::Mismatch { theta0: theta0.unwrap_or(1.0) },
            "missing" => Self::Missing { on: 6, off: 3 },
            other => return Err(HarnessError::Usage(format!("unknown scenario `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub num_mc: usize,
    /// Search grid; the policy's default grid when absent.
    pub kappa_grid: Option<Vec<f64>>,
    /// Training seed; derived from the scenario seed when absent.
    pub seed: Option<u64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { num_mc: darap_core::policy::DEFAULT_NUM_MC, kappa_grid: None, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub snr_db: f64,
    pub policy: PolicySpec,
    pub scenario: ScenarioSpec,
    pub trials: usize,
    pub seed: u64,
    pub training: TrainingConfig,
    /// False-alarm rate at which the detection probability is reported.
    pub pfa: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            snr_db: 10.0,
            policy: PolicySpec::Uniform,
            scenario: ScenarioSpec::Standard,
            trials: 100,
            seed: 0,
            training: TrainingConfig::default(),
            pfa: 1e-4,
        }
    }
}

impl ScenarioConfig {
    /// Loads a TOML or JSON file, chosen by extension. Errors name the offending field path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| path_error(e.path().to_string(), e.into_inner()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| path_error(e.path().to_string(), e.into_inner()))
    }

    pub fn budget(&self) -> f64 {
        snr_to_budget(self.snr_db, self.model.num_cells, self.model.noise_var)
    }

    pub fn model_params(&self) -> Result<ModelParams64> {
        let m = &self.model;
        let budgets = match &m.budgets {
            Some(b) => b.clone(),
            None => vec![self.budget(); m.horizon],
        };
        let stage_weights = m.stage_weights.clone().unwrap_or_else(|| last_stage_weights(m.horizon));
        let observability = match self.scenario {
            ScenarioSpec::Missing { on, off } => ObservabilityMask::periodic(m.horizon, on, off),
            _ => ObservabilityMask::All,
        };
        let params = ModelParams {
            num_cells: m.num_cells,
            prior_prob: m.prior_prob,
            amp_mean: m.amp_mean,
            amp_std: m.amp_std,
            amp_walk_std: m.amp_walk_std,
            noise_var: m.noise_var,
            stay_prob: m.stay_prob,
            death_prob: m.death_prob,
            birth_prob: m.birth_prob,
            neighbor_count: m.neighbor_count,
            horizon: m.horizon,
            budgets,
            stage_weights,
            observability,
        };
        params.validate()?;
        if let ScenarioSpec::Mismatch { theta0 } = self.scenario {
            if !theta0.is_finite() {
                return Err(HarnessError::Config("scenario.theta0 must be finite".into()));
            }
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(HarnessError::Config("pfa must lie in (0, 1)".into()));
        }
        Ok(params)
    }
}

fn path_error(path: String, err: impl std::fmt::Display) -> HarnessError {
    if path.is_empty() || path == "." {
        HarnessError::Config(err.to_string())
    } else {
        HarnessError::Config(format!("at `{path}`: {err}"))
    }
}

/// Per-stage budget for a given SNR: `Q sigma^2 10^(snr / 10)`.
pub fn snr_to_budget(snr_db: f64, num_cells: usize, noise_var: f64) -> f64 {
    num_cells as f64 * noise_var * 10f64.powf(snr_db / 10.0)
}

pub fn budget_to_snr(budget: f64, num_cells: usize, noise_var: f64) -> f64 {
    10.0 * (budget / (num_cells as f64 * noise_var)).log10()
}

/// Parses `a:b:step` (inclusive) or a single value.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let bad = || HarnessError::Usage(format!("invalid range `{text}`, expected `start:stop:step` or a number"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [v] if v.is_finite() => Ok(vec![v]),
        [a, b, s] if a.is_finite() && b.is_finite() && s > 0.0 && b >= a => {
            let n = ((b - a) / s + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| a + k as f64 * s).collect())
        }
        _ => Err(bad()),
    }
}

/// Parses a comma-separated list of values or ranges.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        out.extend(parse_range(part)?);
    }
    Ok(out)
}
