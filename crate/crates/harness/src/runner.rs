//! Policy preparation and the closed-loop episode runner.

use darap_core::episode::{Action, Episode};
use darap_core::model::Model;
use darap_core::policy::{
    default_kappa_grid, default_rollout_grid, online_rollout_step, train_myopic_plus, train_offline_rollout,
    KappaSchedule, Provenance,
};
use darap_core::rng::{substream_seed, trial_rng, Stream};
use darap_core::KappaSchedule64;
use serde::Serialize;

use crate::config::{PolicySpec, ScenarioConfig, ScenarioSpec};
use crate::error::{HarnessError, Result};

/// Substream index reserved for training so it never overlaps evaluation trials.
const TRAINING_STREAM: u64 = u64::MAX;

/// A policy ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedPolicy {
    Schedule { name: String, schedule: KappaSchedule64 },
    Online { t0: usize, grid: Vec<f64>, num_mc: usize },
    Omniscient,
    SemiOmniscient,
}

impl ResolvedPolicy {
    pub fn uniform(horizon: usize) -> Self {
        Self::Schedule { name: "uniform".into(), schedule: KappaSchedule::uniform(horizon) }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Schedule { name, .. } => name,
            Self::Online { .. } => "online_rollout",
            Self::Omniscient => "omniscient",
            Self::SemiOmniscient => "semi_omniscient",
        }
    }

    pub fn kappas(&self) -> Option<&[f64]> {
        match self {
            Self::Schedule { schedule, .. } => Some(&schedule.kappas),
            _ => None,
        }
    }

    fn oracle_tracking(&self) -> bool {
        matches!(self, Self::Omniscient | Self::SemiOmniscient)
    }
}

pub fn training_seed(cfg: &ScenarioConfig) -> u64 {
    cfg.training.seed.unwrap_or_else(|| substream_seed(cfg.seed, TRAINING_STREAM))
}

/// Trains offline schedules and fixes online parameters.
pub fn prepare_policy(model: &Model<f64>, spec: &PolicySpec, cfg: &ScenarioConfig) -> Result<ResolvedPolicy> {
    let horizon = model.params.horizon;
    let seed = training_seed(cfg);
    let num_mc = cfg.training.num_mc;
    let named = |schedule: KappaSchedule64| ResolvedPolicy::Schedule { name: spec.name().into(), schedule };
    Ok(match spec {
        PolicySpec::Uniform => ResolvedPolicy::uniform(horizon),
        PolicySpec::Myopic => named(KappaSchedule::myopic(horizon)),
        PolicySpec::Darap { kappas } => {
            if kappas.len() != horizon {
                return Err(HarnessError::Config(format!(
                    "policy.kappas has {} entries, horizon is {horizon}",
                    kappas.len()
                )));
            }
            if kappas.iter().any(|k| !(0.0..=1.0).contains(k)) {
                return Err(HarnessError::Config("policy.kappas must lie in [0, 1]".into()));
            }
            named(KappaSchedule { kappas: kappas.clone(), provenance: Provenance::Manual })
        }
        PolicySpec::OfflineRollout { t0 } => {
            let grid = cfg.training.kappa_grid.clone().unwrap_or_else(default_rollout_grid);
            let trained = train_offline_rollout(model, &vec![0.0; *t0], &grid, num_mc, seed)?;
            named(trained.schedule().clone())
        }
        PolicySpec::MyopicPlus { rho } => {
            let grid = cfg.training.kappa_grid.clone().unwrap_or_else(default_kappa_grid);
            named(train_myopic_plus(model, *rho, &grid, num_mc, seed)?.schedule)
        }
        PolicySpec::OnlineRollout { t0 } => {
            if *t0 == 0 {
                return Err(HarnessError::Config("policy.t0 must be at least 1".into()));
            }
            ResolvedPolicy::Online {
                t0: *t0,
                grid: cfg.training.kappa_grid.clone().unwrap_or_else(default_rollout_grid),
                num_mc,
            }
        }
        PolicySpec::Omniscient => ResolvedPolicy::Omniscient,
        PolicySpec::SemiOmniscient => ResolvedPolicy::SemiOmniscient,
    })
}

/// Detection thresholds for the Pd-versus-threshold curve.
pub const CURVE_THRESHOLDS: [f64; 21] = [
    1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999, 0.9999,
    0.99999, 0.999999,
];

/// Detection statistics of one stage of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDetection {
    /// Updated occupancy probabilities at target cells.
    pub positives: Vec<f64>,
    /// The largest non-target probabilities, descending.
    pub top_negatives: Vec<f64>,
    pub num_negatives: usize,
    /// Per curve threshold: targets strictly above it.
    pub curve_hits: Vec<usize>,
    /// Per curve threshold: non-targets strictly above it.
    pub curve_false: Vec<usize>,
}

/// Per-trial results. Sums rather than means so trials can be pooled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub trial: u64,
    /// Sum over true targets of the squared amplitude error, per stage.
    pub stage_sq_err: Vec<f64>,
    pub stage_targets: Vec<usize>,
    /// `M_t` per stage.
    pub stage_cost: Vec<f64>,
    /// `J_T`.
    pub total_cost: f64,
    /// `sum_t gamma_t * stage_sq_err[t]`.
    pub weighted_sq_err: f64,
    pub weighted_targets: f64,
    /// Exploration weight applied at each stage; zero for oracle policies.
    pub kappas: Vec<f64>,
    pub detection: Vec<StageDetection>,
}

/// Evaluation context shared by all trials of one run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: Model<f64>,
    pub scenario: ScenarioSpec,
    pub trials: usize,
    pub seed: u64,
    pub pfa: f64,
}

impl Experiment {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        Ok(Self {
            model: Model::new(cfg.model_params()?)?,
            scenario: cfg.scenario.clone(),
            trials: cfg.trials,
            seed: cfg.seed,
            pfa: cfg.pfa,
        })
    }

    /// Number of non-target scores each trial keeps per stage; enough to locate the pooled
    /// threshold at the configured false-alarm rate.
    pub fn negatives_kept(&self) -> usize {
        (self.pfa * self.trials as f64 * self.model.num_cells() as f64).floor() as usize + 1
    }

    pub fn run_episode(&self, policy: &ResolvedPolicy, trial: u64) -> Result<EpisodeMetrics> {
        let params = &self.model.params;
        let horizon = params.horizon;
        let mut ep = Episode::new(&self.model, self.seed, trial, policy.oracle_tracking())?;
        if let ScenarioSpec::Mismatch { theta0 } = self.scenario {
            ep.override_amplitudes(theta0);
        }
        let mut policy_rng = trial_rng(self.seed, trial, Stream::Policy);
        let keep = self.negatives_kept();
        let mut m = EpisodeMetrics {
            trial,
            stage_sq_err: Vec::with_capacity(horizon),
            stage_targets: Vec::with_capacity(horizon),
            stage_cost: Vec::with_capacity(horizon),
            total_cost: 0.0,
            weighted_sq_err: 0.0,
            weighted_targets: 0.0,
            kappas: Vec::with_capacity(horizon),
            detection: Vec::with_capacity(horizon),
        };
        for t in 1..=horizon {
            let action = match policy {
                ResolvedPolicy::Schedule { schedule, .. } => Action::Kappa(schedule.kappas[t - 1]),
                ResolvedPolicy::Online { t0, grid, num_mc } => {
                    let tail = vec![0.0; *t0];
                    Action::Kappa(online_rollout_step(&self.model, &ep.belief, &tail, grid, *num_mc, &mut policy_rng)?)
                }
                ResolvedPolicy::Omniscient => Action::Omniscient,
                ResolvedPolicy::SemiOmniscient => Action::SemiOmniscient,
            };
            m.kappas.push(match action {
                Action::Kappa(k) => k,
                _ => 0.0,
            });
            let rec = ep.step(action)?;
            let estimates = match &rec.oracle_estimates {
                Some(o) if policy.oracle_tracking() => o,
                _ => &rec.filter_estimates,
            };
            let sq: f64 = rec.true_amplitudes.iter().zip(estimates).map(|(a, e)| (a - e) * (a - e)).sum();
            if !sq.is_finite() || !rec.cost.is_finite() {
                return Err(HarnessError::Numeric(format!("non-finite metric at trial {trial}, stage {t}")));
            }
            let gamma = params.stage_weights[t - 1];
            m.weighted_sq_err += gamma * sq;
            m.weighted_targets += gamma * rec.target_cells.len() as f64;
            m.total_cost += gamma * rec.cost;
            m.stage_sq_err.push(sq);
            m.stage_targets.push(rec.target_cells.len());
            m.stage_cost.push(rec.cost);
            m.detection.push(stage_detection(&rec.updated_probs, &rec.target_cells, keep));
        }
        Ok(m)
    }
}

fn stage_detection(probs: &[f64], targets: &[usize], keep: usize) -> StageDetection {
    let mut is_target = vec![false; probs.len()];
    for &c in targets {
        is_target[c] = true;
    }
    let positives: Vec<f64> = targets.iter().map(|&c| probs[c]).collect();
    let mut negatives: Vec<f64> = probs.iter().zip(&is_target).filter(|(_, t)| !**t).map(|(p, _)| *p).collect();
    let num_negatives = negatives.len();
    let curve_hits = CURVE_THRESHOLDS.iter().map(|th| positives.iter().filter(|p| *p > th).count()).collect();
    let curve_false = CURVE_THRESHOLDS.iter().map(|th| negatives.iter().filter(|p| *p > th).count()).collect();
    let keep = keep.min(negatives.len());
    if keep > 0 && keep < negatives.len() {
        negatives.select_nth_unstable_by(keep - 1, |a, b| b.total_cmp(a));
    }
    negatives.truncate(keep);
    negatives.sort_by(|a, b| b.total_cmp(a));
    StageDetection { positives, top_negatives: negatives, num_negatives, curve_hits, curve_false }
}
