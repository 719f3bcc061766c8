//! Monte Carlo evaluation and paired aggregation.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::runner::{EpisodeMetrics, Experiment, ResolvedPolicy, CURVE_THRESHOLDS};

/// Every trial of one policy, in trial order.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: ResolvedPolicy,
    pub episodes: Vec<EpisodeMetrics>,
    pub wall_time: Duration,
}

/// Runs trials `0..exp.trials` in parallel. Results are gathered by trial index, so the output
/// does not depend on the number of worker threads.
pub fn evaluate(exp: &Experiment, policy: &ResolvedPolicy) -> Result<PolicyRun> {
    let start = Instant::now();
    let episodes = (0..exp.trials as u64)
        .into_par_iter()
        .map(|trial| exp.run_episode(policy, trial))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyRun { policy: policy.clone(), episodes, wall_time: start.elapsed() })
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ratio of sums `sum(num) / sum(den)` with its delta-method standard error.
pub fn ratio_se(num: &[f64], den: &[f64]) -> Option<(f64, f64)> {
    let n = num.len() as f64;
    let (sn, sd): (f64, f64) = (num.iter().sum(), den.iter().sum());
    if sd <= 0.0 {
        return None;
    }
    let r = sn / sd;
    if num.len() < 2 {
        return Some((r, 0.0));
    }
    let dbar = sd / n;
    let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - r * b).collect();
    let (_, se) = mean_se(&resid);
    Some((r, se / dbar))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    /// Mean squared amplitude error over true targets; absent when no target existed.
    pub mse: Option<f64>,
    pub mse_se: Option<f64>,
    pub mean_targets: f64,
    pub cost: f64,
    pub cost_se: f64,
    pub mean_kappa: f64,
    /// Pooled non-target score that is exceeded at most at the configured false-alarm rate.
    pub threshold_at_pfa: f64,
    pub pd_at_pfa: Option<f64>,
    pub curve_pd: Vec<Option<f64>>,
    pub curve_pfa: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub kappas: Option<Vec<f64>>,
    pub trials: usize,
    /// Weighted MSE `sum gamma_t SE_t / sum gamma_t |Psi(t)|`.
    pub weighted_mse: Option<f64>,
    pub weighted_mse_se: Option<f64>,
    pub final_mse: Option<f64>,
    pub total_cost: f64,
    pub total_cost_se: f64,
    pub stages: Vec<StageSummary>,
}

pub fn summarize(run: &PolicyRun, pfa: f64) -> Result<PolicySummary> {
    let eps = &run.episodes;
    let trials = eps.len();
    if trials == 0 {
        return Err(HarnessError::Config("no trials to summarize".into()));
    }
    let horizon = eps[0].stage_sq_err.len();
    let mut stages = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let sq: Vec<f64> = eps.iter().map(|e| e.stage_sq_err[k]).collect();
        let n: Vec<f64> = eps.iter().map(|e| e.stage_targets[k] as f64).collect();
        let mse = ratio_se(&sq, &n);
        let cost: Vec<f64> = eps.iter().map(|e| e.stage_cost[k]).collect();
        let (cost, cost_se) = mean_se(&cost);
        let mean_kappa = eps.iter().map(|e| e.kappas[k]).sum::<f64>() / trials as f64;
        let (threshold_at_pfa, pd_at_pfa) = pd_at_pfa(eps, k, pfa);
        let positives: usize = eps.iter().map(|e| e.detection[k].positives.len()).sum();
        let negatives: usize = eps.iter().map(|e| e.detection[k].num_negatives).sum();
        let curve_pd = (0..CURVE_THRESHOLDS.len())
            .map(|j| {
                let hits: usize = eps.iter().map(|e| e.detection[k].curve_hits[j]).sum();
                (positives > 0).then(|| hits as f64 / positives as f64)
            })
            .collect();
        let curve_pfa = (0..CURVE_THRESHOLDS.len())
            .map(|j| {
                let fa: usize = eps.iter().map(|e| e.detection[k].curve_false[j]).sum();
                if negatives > 0 {
                    fa as f64 / negatives as f64
                } else {
                    0.0
                }
            })
            .collect();
        stages.push(StageSummary {
            stage: k + 1,
            mse: mse.map(|m| m.0),
            mse_se: mse.map(|m| m.1),
            mean_targets: n.iter().sum::<f64>() / trials as f64,
            cost,
            cost_se,
            mean_kappa,
            threshold_at_pfa,
            pd_at_pfa,
            curve_pd,
            curve_pfa,
        });
    }
    let w_sq: Vec<f64> = eps.iter().map(|e| e.weighted_sq_err).collect();
    let w_n: Vec<f64> = eps.iter().map(|e| e.weighted_targets).collect();
    let weighted = ratio_se(&w_sq, &w_n);
    let totals: Vec<f64> = eps.iter().map(|e| e.total_cost).collect();
    let (total_cost, total_cost_se) = mean_se(&totals);
    Ok(PolicySummary {
        policy: run.policy.name().to_string(),
        kappas: run.policy.kappas().map(<[f64]>::to_vec),
        trials,
        weighted_mse: weighted.map(|w| w.0),
        weighted_mse_se: weighted.map(|w| w.1),
        final_mse: stages.last().and_then(|s| s.mse),
        total_cost,
        total_cost_se,
        stages,
    })
}

/// Pools the kept non-target scores of stage index `k`, takes the `(m + 1)`-th largest with
/// `m = floor(pfa * N)` as threshold and counts targets strictly above it.
fn pd_at_pfa(eps: &[EpisodeMetrics], k: usize, pfa: f64) -> (f64, Option<f64>) {
    let total: usize = eps.iter().map(|e| e.detection[k].num_negatives).sum();
    let mut pooled: Vec<f64> = eps.iter().flat_map(|e| e.detection[k].top_negatives.iter().copied()).collect();
    pooled.sort_by(|a, b| b.total_cmp(a));
    let m = (pfa * total as f64).floor() as usize;
    let threshold = pooled.get(m).copied().unwrap_or(f64::NEG_INFINITY);
    let positives: Vec<f64> = eps.iter().flat_map(|e| e.detection[k].positives.iter().copied()).collect();
    if positives.is_empty() {
        return (threshold, None);
    }
    let hits = positives.iter().filter(|p| **p > threshold).count();
    (threshold, Some(hits as f64 / positives.len() as f64))
}

/// `10 log10(mean(baseline) / mean(policy))` over paired trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedGain {
    pub db: f64,
    /// Delta-method standard error of `db`, using the trial pairing.
    pub se_db: f64,
}

impl PairedGain {
    /// One-sided lower confidence limit at `z` standard errors.
    pub fn lower(&self, z: f64) -> f64 {
        self.db - z * self.se_db
    }
}

pub fn paired_gain(baseline: &[f64], policy: &[f64]) -> Option<PairedGain> {
    let n = baseline.len();
    if n == 0 || n != policy.len() {
        return None;
    }
    let nf = n as f64;
    let (ma, mb) = (baseline.iter().sum::<f64>() / nf, policy.iter().sum::<f64>() / nf);
    if !(ma > 0.0 && mb > 0.0) {
        return None;
    }
    let db = 10.0 * (ma / mb).log10();
    if n < 2 {
        return Some(PairedGain { db, se_db: 0.0 });
    }
    // Var of log(ma / mb) through the linearised residual a/ma - b/mb.
    let resid: Vec<f64> = baseline.iter().zip(policy).map(|(a, b)| a / ma - b / mb).collect();
    let (_, se) = mean_se(&resid);
    Some(PairedGain { db, se_db: 10.0 / std::f64::consts::LN_10 * se })
}

/// Weighted-MSE gain of `policy` over `baseline`; both runs must share seeds.
pub fn mse_gain(baseline: &PolicyRun, policy: &PolicyRun) -> Option<PairedGain> {
    let a: Vec<f64> = baseline.episodes.iter().map(|e| e.weighted_sq_err).collect();
    let b: Vec<f64> = policy.episodes.iter().map(|e| e.weighted_sq_err).collect();
    paired_gain(&a, &b)
}

/// MSE gain at stage `t` (1-based).
pub fn stage_mse_gain(baseline: &PolicyRun, policy: &PolicyRun, t: usize) -> Option<PairedGain> {
    let a: Vec<f64> = baseline.episodes.iter().map(|e| e.stage_sq_err[t - 1]).collect();
    let b: Vec<f64> = policy.episodes.iter().map(|e| e.stage_sq_err[t - 1]).collect();
    paired_gain(&a, &b)
}

pub fn cost_gain(baseline: &PolicyRun, policy: &PolicyRun) -> Option<PairedGain> {
    let a: Vec<f64> = baseline.episodes.iter().map(|e| e.total_cost).collect();
    let b: Vec<f64> = policy.episodes.iter().map(|e| e.total_cost).collect();
    paired_gain(&a, &b)
}

/// Paired difference `policy - baseline` of per-trial values with its standard error.
pub fn paired_difference(baseline: &[f64], policy: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = policy.iter().zip(baseline).map(|(p, b)| p - b).collect();
    mean_se(&d)
}
