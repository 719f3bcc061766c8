//! Per-cell belief filter.
//!
//! The posterior is summarised per cell by the triple `(p, mu, sigma^2)`: the probability that
//! a target occupies the cell and the Gaussian moments of its amplitude given occupancy.
//! Updates are exact Kalman/Bayes steps; prediction keeps a single Gaussian mode per cell,
//! sourced from the largest contributor to the predicted occupancy mass.

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelParams, Observation};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Predicted,
    Updated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState<T> {
    pub stage: usize,
    pub probs: Vec<T>,
    pub means: Vec<T>,
    pub vars: Vec<T>,
    pub flavor: Flavor,
}

impl<T: Real> BeliefState<T> {
    pub fn num_cells(&self) -> usize {
        self.probs.len()
    }

    /// `c_i = sigma^2 / sigma_i^2`.
    pub fn precision(&self, cell: usize, noise_var: T) -> T {
        noise_var / self.vars[cell]
    }

    pub fn precisions(&self, noise_var: T) -> Vec<T> {
        self.vars.iter().map(|v| noise_var / *v).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.probs
            .iter()
            .chain(&self.means)
            .chain(&self.vars)
            .all(|x| x.is_finite())
    }
}

pub fn clamp_prob<T: Real>(p: T) -> T {
    let eps = T::prob_floor();
    p.max(eps).min(T::one() - eps)
}

pub fn belief_init<T: Real>(params: &ModelParams<T>) -> Result<BeliefState<T>> {
    if !(params.amp_std > T::zero()) {
        return Err(Error::Config("amp_std must be positive for the filter".into()));
    }
    let q = params.num_cells;
    Ok(BeliefState {
        stage: 1,
        probs: vec![clamp_prob(params.prior_prob); q],
        means: vec![params.amp_mean; q],
        vars: vec![params.prior_var(); q],
        flavor: Flavor::Predicted,
    })
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Conjugate Gaussian update of one cell: returns `(mu_post, var_post, log likelihood ratio)`.
pub(crate) fn cell_update<T: Real>(mu: T, var: T, lambda: T, y: T, noise_var: T) -> (T, T, T) {
    let half = T::lit(0.5);
    let a = lambda.sqrt();
    let s = lambda * var + noise_var;
    let resid = y - a * mu;
    let mu_post = mu + var * a / s * resid;
    let var_post = var * noise_var / (noise_var + lambda * var);
    let llr = -half * (s / noise_var).ln() - resid * resid / (s + s) + y * y / (noise_var + noise_var);
    (mu_post, var_post, llr)
}

pub fn belief_update<T: Real>(
    params: &ModelParams<T>,
    belief: &BeliefState<T>,
    obs: &Observation<T>,
) -> Result<BeliefState<T>> {
    if belief.flavor != Flavor::Predicted {
        return Err(Error::Contract("update expects a predicted belief".into()));
    }
    if belief.stage != obs.stage {
        return Err(Error::Contract(format!(
            "belief stage {} does not match observation stage {}",
            belief.stage, obs.stage
        )));
    }
    let mut out = belief.clone();
    out.flavor = Flavor::Updated;
    let noise_var = params.noise_var;
    for i in 0..belief.num_cells() {
        let lambda = obs.effort[i];
        if !obs.observed[i] || !(lambda > T::zero()) {
            continue;
        }
        let (mu, var, llr) = cell_update(belief.means[i], belief.vars[i], lambda, obs.values[i], noise_var);
        let p = belief.probs[i];
        let logit = p.ln() - (-p).ln_1p();
        out.probs[i] = clamp_prob(sigmoid(logit + llr));
        out.means[i] = mu;
        out.vars[i] = var;
    }
    Ok(out)
}

/// Predicted occupancy `(1-alpha)[pi0 p_i + (1-pi0)/G sum_{j in G(i)} p_j] + beta/Q`, unclamped.
pub(crate) fn predict_probs<T: Real>(model: &Model<T>, probs: &[T]) -> Vec<T> {
    let p = &model.params;
    let survive = T::one() - p.death_prob;
    let stay = survive * p.stay_prob;
    let spread = survive * (T::one() - p.stay_prob) / T::from_usize_lossy(p.neighbor_count);
    let birth = p.birth_prob / T::from_usize_lossy(p.num_cells);
    (0..probs.len())
        .map(|i| {
            let inflow: T = model.neighbors(i).iter().map(|&j| probs[j]).sum();
            stay * probs[i] + spread * inflow + birth
        })
        .collect()
}

pub fn belief_predict<T: Real>(model: &Model<T>, belief: &BeliefState<T>) -> Result<BeliefState<T>> {
    if belief.flavor != Flavor::Updated {
        return Err(Error::Contract("predict expects an updated belief".into()));
    }
    let p = &model.params;
    let q = belief.num_cells();
    let survive = T::one() - p.death_prob;
    let stay = survive * p.stay_prob;
    let spread = survive * (T::one() - p.stay_prob) / T::from_usize_lossy(p.neighbor_count);
    let birth = p.birth_prob / T::from_usize_lossy(q);
    let walk = p.walk_var();

    let mut probs = Vec::with_capacity(q);
    let mut means = Vec::with_capacity(q);
    let mut vars = Vec::with_capacity(q);
    let mut nbrs: Vec<usize> = Vec::with_capacity(p.neighbor_count);
    for i in 0..q {
        nbrs.clear();
        nbrs.extend_from_slice(model.neighbors(i));
        nbrs.sort_unstable();

        let mut best_mass = stay * belief.probs[i];
        let mut source = Some(i);
        let mut total = best_mass;
        for &j in &nbrs {
            let m = spread * belief.probs[j];
            total += m;
            if m > best_mass {
                best_mass = m;
                source = Some(j);
            }
        }
        total += birth;
        if birth > best_mass {
            source = None;
        }
        probs.push(clamp_prob(total));
        match source {
            Some(j) => {
                means.push(belief.means[j]);
                vars.push(belief.vars[j] + walk);
            }
            None => {
                means.push(p.amp_mean);
                vars.push(p.prior_var());
            }
        }
    }
    Ok(BeliefState {
        stage: belief.stage + 1,
        probs,
        means,
        vars,
        flavor: Flavor::Predicted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    None,
    SemiOmniscient,
    Omniscient,
}

/// Ground truth available to an oracle at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleKnowledge {
    pub mode: OracleMode,
    pub stage: usize,
    /// `Psi(t)`; only populated for the omniscient mode.
    pub current: Option<Vec<usize>>,
    /// `Psi(t-1)`; `None` at the first stage.
    pub previous: Option<Vec<usize>>,
}

impl OracleKnowledge {
    pub fn omniscient(stage: usize, current: Vec<usize>) -> Self {
        Self {
            mode: OracleMode::Omniscient,
            stage,
            current: Some(current),
            previous: None,
        }
    }

    pub fn semi_omniscient(stage: usize, previous: Option<Vec<usize>>) -> Self {
        Self {
            mode: OracleMode::SemiOmniscient,
            stage,
            current: None,
            previous,
        }
    }
}

/// Amplitude moments an oracle propagates along the true target trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrack<T> {
    pub means: Vec<T>,
    pub vars: Vec<T>,
}

impl<T: Real> OracleTrack<T> {
    pub fn init(params: &ModelParams<T>) -> Self {
        Self {
            means: vec![params.amp_mean; params.num_cells],
            vars: vec![params.prior_var(); params.num_cells],
        }
    }

    /// Conjugate update of every measured cell.
    pub fn update(&self, params: &ModelParams<T>, obs: &Observation<T>) -> Self {
        let mut out = self.clone();
        for i in 0..self.means.len() {
            let lambda = obs.effort[i];
            if obs.observed[i] && lambda > T::zero() {
                let (mu, var, _) = cell_update(self.means[i], self.vars[i], lambda, obs.values[i], params.noise_var);
                out.means[i] = mu;
                out.vars[i] = var;
            }
        }
        out
    }

    /// Every cell of `H(s)` inherits the posterior at target cell `s` plus the walk variance;
    /// cells away from all targets revert to the amplitude prior.
    pub fn predict(&self, model: &Model<T>, target_cells: &[usize]) -> Self {
        let p = &model.params;
        let mut out = Self::init(p);
        for &s in target_cells {
            for i in model.vicinity(s) {
                out.means[i] = self.means[s];
                out.vars[i] = self.vars[s] + p.walk_var();
            }
        }
        out
    }
}

pub fn oracle_belief<T: Real>(
    model: &Model<T>,
    knowledge: &OracleKnowledge,
    track: &OracleTrack<T>,
) -> Result<BeliefState<T>> {
    let q = model.num_cells();
    let probs = match knowledge.mode {
        OracleMode::None => {
            return Err(Error::Contract("oracle belief needs oracle knowledge".into()))
        }
        OracleMode::Omniscient => {
            let cells = knowledge
                .current
                .as_ref()
                .ok_or_else(|| Error::Contract("omniscient oracle needs Psi(t)".into()))?;
            let mut p = vec![T::zero(); q];
            for &c in cells {
                p[c] = T::one();
            }
            p
        }
        OracleMode::SemiOmniscient => match &knowledge.previous {
            None => vec![model.params.prior_prob; q],
            Some(cells) => {
                let mut ind = vec![T::zero(); q];
                for &c in cells {
                    ind[c] = T::one();
                }
                predict_probs(model, &ind)
            }
        },
    };
    Ok(BeliefState {
        stage: knowledge.stage,
        probs: probs.into_iter().map(clamp_prob).collect(),
        means: track.means.clone(),
        vars: track.vars.clone(),
        flavor: Flavor::Predicted,
    })
}
