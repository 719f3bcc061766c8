//! Cost functionals and exploration-schedule training.
//!
//! A D-ARAP policy is a schedule `kappa(1..T)`. Three ways of choosing it are provided:
//! offline rollout (extend a schedule one stage at a time by line search in front of a fixed
//! base tail), myopic+ (largest `kappa` whose expected stage cost stays within `1 + rho` of the
//! myopic cost) and online rollout (re-plan each stage from the current belief).

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{myopic_allocate, Allocation};
use crate::belief::BeliefState;
use crate::episode::{Action, Episode};
use crate::model::{last_stage_weights, Model, SceneState, Target};
use crate::rng::{std_normal, unit, TrialStreams};
use crate::scalar::compensated_sum;
use crate::{Error, Real, Result};

/// Default line-search grid `{0, 0.05, ..., 1}`.
pub fn default_kappa_grid<T: Real>() -> Vec<T> {
    (0..=20).map(|k| T::lit(k as f64 / 20.0)).collect()
}

/// Default grid without zero, for the rollout searches over `(0, 1]`.
pub fn default_rollout_grid<T: Real>() -> Vec<T> {
    (1..=20).map(|k| T::lit(k as f64 / 20.0)).collect()
}

pub const DEFAULT_NUM_MC: usize = 100;
pub const DEFAULT_RHO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    OfflineRollout { t0: usize },
    MyopicPlus { rho: f64 },
    OnlineRollout { t0: usize },
    Manual,
    Myopic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSchedule<T> {
    pub kappas: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Real> KappaSchedule<T> {
    pub fn myopic(horizon: usize) -> Self {
        Self {
            kappas: vec![T::zero(); horizon],
            provenance: Provenance::Myopic,
        }
    }

    pub fn uniform(horizon: usize) -> Self {
        Self {
            kappas: vec![T::one(); horizon],
            provenance: Provenance::Manual,
        }
    }

    pub fn horizon(&self) -> usize {
        self.kappas.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub num_trials: usize,
}

impl<T: Real> CostEstimate<T> {
    pub fn from_samples(samples: &[T]) -> Self {
        let n = samples.len();
        let nt = T::from_usize_lossy(n);
        let mean = compensated_sum(samples.iter().copied()) / nt;
        let std_error = if n > 1 {
            let ss = compensated_sum(samples.iter().map(|x| (*x - mean) * (*x - mean)));
            (ss / (nt - T::one()) / nt).sqrt()
        } else {
            T::zero()
        };
        Self {
            mean,
            std_error,
            num_trials: n,
        }
    }
}

/// `M_t = sum_i p_i / (sigma^2 / sigma_i^2 + lambda_i)`.
pub fn per_stage_cost<T: Real>(belief: &BeliefState<T>, alloc: &Allocation<T>, noise_var: T) -> Result<T> {
    if belief.stage != alloc.stage {
        return Err(Error::Contract(format!(
            "belief stage {} does not match allocation stage {}",
            belief.stage, alloc.stage
        )));
    }
    if belief.num_cells() != alloc.lambda.len() {
        return Err(Error::Contract("belief and allocation sizes differ".into()));
    }
    Ok(compensated_sum(
        (0..belief.num_cells()).map(|i| belief.probs[i] / (noise_var / belief.vars[i] + alloc.lambda[i])),
    ))
}

/// `sum_t gamma(t) M_t`.
pub fn weighted_cost<T: Real>(stage_costs: &[T], gamma: &[T]) -> Result<T> {
    if stage_costs.len() != gamma.len() {
        return Err(Error::Contract(format!(
            "{} stage costs but {} weights",
            stage_costs.len(),
            gamma.len()
        )));
    }
    Ok(compensated_sum(stage_costs.iter().zip(gamma).map(|(m, g)| *m * *g)))
}

pub fn total_cost<T: Real>(trajectory: &[(BeliefState<T>, Allocation<T>)], gamma: &[T], noise_var: T) -> Result<T> {
    let costs = trajectory
        .iter()
        .map(|(b, a)| per_stage_cost(b, a, noise_var))
        .collect::<Result<Vec<_>>>()?;
    weighted_cost(&costs, gamma)
}

/// Stage weights used when the objective is cut to the first `tau` stages.
pub fn truncated_weights<T: Real>(gamma: &[T], tau: usize) -> Vec<T> {
    let last_only = !gamma.is_empty()
        && gamma[gamma.len() - 1] > T::zero()
        && gamma[..gamma.len() - 1].iter().all(|g| *g == T::zero());
    let head = &gamma[..tau.min(gamma.len())];
    if last_only || !head.iter().any(|g| *g > T::zero()) {
        last_stage_weights(tau)
    } else {
        head.to_vec()
    }
}

/// Monte Carlo estimate of `J_T` for a fixed schedule; trial `k` uses substream `k` of `seed`.
pub fn estimate_policy_cost<T: Real>(
    model: &Model<T>,
    schedule: &KappaSchedule<T>,
    num_trials: usize,
    seed: u64,
) -> Result<CostEstimate<T>> {
    if num_trials == 0 {
        return Err(Error::Contract("num_trials must be at least 1".into()));
    }
    let params = &model.params;
    if schedule.horizon() != params.horizon {
        return Err(Error::Contract("schedule length differs from the horizon".into()));
    }
    let samples = (0..num_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut ep = Episode::new(model, seed, trial, false)?;
            ep.run_kappas(&schedule.kappas)?;
            weighted_cost(&ep.costs, &params.stage_weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostEstimate::from_samples(&samples))
}

fn check_grid<T: Real>(grid: &[T], allow_zero: bool) -> Result<()> {
    let ok = !grid.is_empty()
        && grid
            .iter()
            .all(|k| *k <= T::one() && (if allow_zero { *k >= T::zero() } else { *k > T::zero() }));
    if ok {
        Ok(())
    } else {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        Err(Error::Contract(format!("kappa grid must be a nonempty subset of {range}")))
    }
}

fn argmin<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

fn fresh_episodes<T: Real>(model: &Model<T>, num_mc: usize, seed: u64) -> Result<Vec<Episode<'_, T>>> {
    (0..num_mc as u64)
        .into_par_iter()
        .map(|trial| Episode::new(model, seed, trial, false))
        .collect()
}

fn advance<T: Real>(episodes: &mut [Episode<'_, T>], kappa: T) -> Result<()> {
    episodes
        .par_iter_mut()
        .try_for_each(|ep| ep.step(Action::Kappa(kappa)).map(|_| ()))
}

/// One line search of the offline rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSearch<T> {
    /// Planning horizon `tau` of this search.
    pub tau: usize,
    /// Stage whose coefficient was searched, `tau - T0`.
    pub stage: usize,
    pub grid: Vec<T>,
    pub estimates: Vec<T>,
    pub chosen: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRollout<T> {
    /// Schedules `kappa_tau` for `tau = T0+1..=T`; the last is the trained policy.
    pub schedules: Vec<KappaSchedule<T>>,
    pub searches: Vec<RolloutSearch<T>>,
}

impl<T: Real> OfflineRollout<T> {
    pub fn schedule(&self) -> &KappaSchedule<T> {
        self.schedules.last().expect("at least one schedule")
    }
}

/// Offline rollout training.
///
/// Starts from `omega = {1}` and, for `tau = T0+2..=T`, line-searches `kappa(tau - T0)` in front
/// of the base tail, minimising the Monte Carlo estimate of `J_tau`. All candidates of one
/// search share the same sample paths, and the prefix `omega` is simulated once and forked.
pub fn train_offline_rollout<T: Real>(
    model: &Model<T>,
    base_tail: &[T],
    grid: &[T],
    num_mc: usize,
    seed: u64,
) -> Result<OfflineRollout<T>> {
    let params = &model.params;
    let t0 = base_tail.len();
    let horizon = params.horizon;
    if t0 == 0 || horizon < t0 + 1 {
        return Err(Error::Contract("need 1 <= T0 < T".into()));
    }
    if num_mc == 0 {
        return Err(Error::Contract("num_mc must be at least 1".into()));
    }
    check_grid(grid, false)?;
    check_grid(base_tail, true)?;
    let provenance = Provenance::OfflineRollout { t0 };

    let mut omega = vec![T::one()];
    let with_tail = |omega: &[T]| KappaSchedule {
        kappas: omega.iter().chain(base_tail).copied().collect(),
        provenance: provenance.clone(),
    };
    let mut schedules = vec![with_tail(&omega)];
    let mut searches = Vec::new();
    let mut prefix = fresh_episodes(model, num_mc, seed)?;

    for tau in t0 + 2..=horizon {
        advance(&mut prefix, *omega.last().expect("nonempty"))?;
        let gamma = truncated_weights(&params.stage_weights, tau);
        let estimates = grid
            .iter()
            .map(|&kappa| {
                let costs = prefix
                    .par_iter()
                    .map(|ep| {
                        let mut ep = ep.clone();
                        ep.step(Action::Kappa(kappa))?;
                        ep.run_kappas(base_tail)?;
                        weighted_cost(&ep.costs, &gamma)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CostEstimate::from_samples(&costs).mean)
            })
            .collect::<Result<Vec<T>>>()?;
        let chosen = grid[argmin(&estimates)];
        omega.push(chosen);
        searches.push(RolloutSearch {
            tau,
            stage: tau - t0,
            grid: grid.to_vec(),
            estimates,
            chosen,
        });
        schedules.push(with_tail(&omega));
    }
    Ok(OfflineRollout { schedules, searches })
}

/// Training record of one interior myopic+ stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MyopicPlusStage<T> {
    pub stage: usize,
    pub grid: Vec<T>,
    /// `B(kappa)` for each grid point.
    pub estimates: Vec<T>,
    /// `B(0)`.
    pub myopic_estimate: T,
    pub chosen: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MyopicPlus<T> {
    pub schedule: KappaSchedule<T>,
    pub rho: T,
    pub stages: Vec<MyopicPlusStage<T>>,
}

impl<T: Real> MyopicPlus<T> {
    /// Checks `B(chosen) <= (1 + rho) B(0)` on the stored estimates.
    pub fn replay_holds(&self) -> bool {
        self.stages.iter().all(|s| {
            let bound = (T::one() + self.rho) * s.myopic_estimate;
            let any_admissible = s.estimates.iter().any(|b| *b <= bound);
            match s.grid.iter().position(|k| *k == s.chosen) {
                Some(i) => s.estimates[i] <= bound || !any_admissible,
                None => !any_admissible,
            }
        })
    }
}

/// Myopic+ training: `kappa(1) = 1`, `kappa(T) = 0`, and for interior stages the largest grid
/// point whose expected stage cost is within `1 + rho` of the myopic one.
pub fn train_myopic_plus<T: Real>(
    model: &Model<T>,
    rho: T,
    grid: &[T],
    num_mc: usize,
    seed: u64,
) -> Result<MyopicPlus<T>> {
    let params = &model.params;
    let horizon = params.horizon;
    if !(rho > T::zero()) {
        return Err(Error::Contract("rho must be positive".into()));
    }
    if horizon < 2 {
        return Err(Error::Contract("myopic+ needs a horizon of at least 2".into()));
    }
    if num_mc == 0 {
        return Err(Error::Contract("num_mc must be at least 1".into()));
    }
    check_grid(grid, true)?;
    let noise_var = params.noise_var;
    let nt = T::from_usize_lossy(num_mc);

    let mut kappas = vec![T::one()];
    let mut stages = Vec::new();
    let mut episodes = fresh_episodes(model, num_mc, seed)?;
    for tau in 2..horizon {
        advance(&mut episodes, *kappas.last().expect("nonempty"))?;
        let budget = params.budget(tau);
        // Per trial: costs at kappa = 0 and at each grid point, on the same belief.
        let per_trial = episodes
            .par_iter()
            .map(|ep| {
                let b = &ep.belief;
                let m = myopic_allocate(b, budget, noise_var)?;
                let u = budget / T::from_usize_lossy(b.num_cells());
                let cost = |kappa: T| {
                    compensated_sum((0..b.num_cells()).map(|i| {
                        let lam = kappa * u + (T::one() - kappa) * m.lambda[i];
                        b.probs[i] / (noise_var / b.vars[i] + lam)
                    }))
                };
                Ok((cost(T::zero()), grid.iter().map(|&k| cost(k)).collect::<Vec<T>>()))
            })
            .collect::<Result<Vec<_>>>()?;
        let b0 = compensated_sum(per_trial.iter().map(|(c0, _)| *c0)) / nt;
        let estimates: Vec<T> = (0..grid.len())
            .map(|g| compensated_sum(per_trial.iter().map(|(_, cs)| cs[g])) / nt)
            .collect();
        let bound = (T::one() + rho) * b0;
        let admissible = grid
            .iter()
            .zip(&estimates)
            .filter(|(_, b)| **b <= bound)
            .map(|(k, _)| *k)
            .fold(None, |acc: Option<T>, k| Some(acc.map_or(k, |a| a.max(k))));
        let chosen = admissible.unwrap_or_else(|| {
            if grid.iter().any(|k| *k == T::zero()) {
                T::zero()
            } else {
                grid.iter().copied().fold(T::infinity(), T::min)
            }
        });
        kappas.push(chosen);
        stages.push(MyopicPlusStage {
            stage: tau,
            grid: grid.to_vec(),
            estimates,
            myopic_estimate: b0,
            chosen,
        });
    }
    kappas.push(T::zero());
    Ok(MyopicPlus {
        schedule: KappaSchedule {
            kappas,
            provenance: Provenance::MyopicPlus { rho: rho.as_f64() },
        },
        rho,
        stages,
    })
}

/// Draws a scene from a belief: each cell independently occupied with probability `p_i`,
/// amplitude `N(mu_i, sigma_i^2)`, then collisions removed in cell order.
pub fn sample_scene_from_belief<T: Real, R: Rng + ?Sized>(
    model: &Model<T>,
    belief: &BeliefState<T>,
    rng: &mut R,
) -> SceneState<T> {
    let candidates: Vec<usize> = (0..belief.num_cells())
        .filter(|&i| unit(rng) < belief.probs[i].as_f64())
        .collect();
    let targets = model
        .reject_collisions(&candidates)
        .into_iter()
        .map(|cell| Target {
            cell,
            amplitude: belief.means[cell] + belief.vars[cell].sqrt() * std_normal::<T, _>(rng),
        })
        .collect();
    SceneState {
        stage: belief.stage,
        num_cells: belief.num_cells(),
        targets,
    }
}

/// Online rollout choice of `kappa` for the current stage.
///
/// Each candidate is applied at the current stage and followed by the base tail, truncated to
/// the remaining horizon (its last entries are kept). Futures are sampled from the current
/// belief and shared across candidates.
pub fn online_rollout_step<T: Real, R: Rng + ?Sized>(
    model: &Model<T>,
    belief: &BeliefState<T>,
    base_tail: &[T],
    grid: &[T],
    num_mc: usize,
    rng: &mut R,
) -> Result<T> {
    let params = &model.params;
    let t = belief.stage;
    if t >= params.horizon {
        return Ok(T::zero());
    }
    if t == 1 {
        return Ok(T::one());
    }
    if num_mc == 0 {
        return Err(Error::Contract("num_mc must be at least 1".into()));
    }
    check_grid(grid, true)?;
    let lookahead = base_tail.len().min(params.horizon - t);
    let tail = &base_tail[base_tail.len() - lookahead..];
    let end = t + lookahead;
    let gamma_window: Vec<T> = if params.uses_last_stage_weights() || !params.stage_weights[t - 1..end].iter().any(|g| *g > T::zero()) {
        last_stage_weights(lookahead + 1)
    } else {
        params.stage_weights[t - 1..end].to_vec()
    };

    let root: u64 = rng.random();
    let starts = (0..num_mc as u64)
        .map(|m| {
            let mut streams = TrialStreams::new(root, m);
            let scene = sample_scene_from_belief(model, belief, &mut streams.scene);
            Episode::from_belief(model, scene, belief.clone(), streams, false)
        })
        .collect::<Vec<_>>();
    let estimates = grid
        .iter()
        .map(|&kappa| {
            let costs = starts
                .par_iter()
                .map(|ep| {
                    let mut ep = ep.clone();
                    ep.step(Action::Kappa(kappa))?;
                    ep.run_kappas(tail)?;
                    weighted_cost(&ep.costs, &gamma_window)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CostEstimate::from_samples(&costs).mean)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(grid[argmin(&estimates)])
}
