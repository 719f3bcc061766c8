//! Ground-truth scene dynamics and the observation channel.
//!
//! Cells are indexed `0..Q`; stages are numbered from 1. A target occupies one cell and
//! carries an amplitude. Per stage the scene evolves by deaths, moves, an amplitude random
//! walk and births, in that order. Targets never share a closed neighbourhood
//! `H(j) = {j} ∪ G(j)`: colliding moves are cancelled and colliding births are redrawn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::Allocation;
use crate::rng::{std_normal, unit};
use crate::{Error, Real, Result};

/// Maximum number of cell draws for a birth before it is skipped.
pub const BIRTH_RETRIES: usize = 100;

/// Which stages/cells produce usable measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservabilityMask {
    #[default]
    All,
    /// One flag per stage; a stage is either fully observed or fully dark.
    Stages(Vec<bool>),
    /// Full `T x Q` mask.
    Cells(Vec<Vec<bool>>),
}

impl ObservabilityMask {
    /// Periodic on/off pattern starting with `on` observed stages at `t = 1`.
    pub fn periodic(horizon: usize, on: usize, off: usize) -> Self {
        let period = on + off;
        Self::Stages((0..horizon).map(|k| period == 0 || k % period < on).collect())
    }

    pub fn observed(&self, stage: usize, cell: usize) -> bool {
        match self {
            Self::All => true,
            Self::Stages(s) => s.get(stage - 1).copied().unwrap_or(true),
            Self::Cells(rows) => rows
                .get(stage - 1)
                .and_then(|r| r.get(cell))
                .copied()
                .unwrap_or(true),
        }
    }

    pub fn stage_row(&self, stage: usize, q: usize) -> Vec<bool> {
        (0..q).map(|i| self.observed(stage, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub num_cells: usize,
    pub prior_prob: T,
    pub amp_mean: T,
    pub amp_std: T,
    pub amp_walk_std: T,
    pub noise_var: T,
    pub stay_prob: T,
    pub death_prob: T,
    pub birth_prob: T,
    pub neighbor_count: usize,
    pub horizon: usize,
    pub budgets: Vec<T>,
    pub stage_weights: Vec<T>,
    #[serde(default)]
    pub observability: ObservabilityMask,
}

impl<T: Real> ModelParams<T> {
    /// Reference parameter set with a constant per-stage budget and last-stage weighting.
    pub fn table_one(horizon: usize, budget: T) -> Self {
        Self {
            num_cells: 1000,
            prior_prob: T::lit(0.01),
            amp_mean: T::one(),
            amp_std: T::lit(1.0 / 6.0),
            amp_walk_std: T::lit(1.0 / 20.0),
            noise_var: T::one(),
            stay_prob: T::lit(1.0 / 3.0),
            death_prob: T::zero(),
            birth_prob: T::zero(),
            neighbor_count: 2,
            horizon,
            budgets: vec![budget; horizon],
            stage_weights: last_stage_weights(horizon),
            observability: ObservabilityMask::All,
        }
    }

    /// Replaces horizon-dependent vectors, keeping a constant budget and last-stage weights.
    pub fn with_horizon(mut self, horizon: usize, budget: T) -> Self {
        self.horizon = horizon;
        self.budgets = vec![budget; horizon];
        self.stage_weights = last_stage_weights(horizon);
        self
    }

    pub fn prior_var(&self) -> T {
        self.amp_std * self.amp_std
    }

    pub fn walk_var(&self) -> T {
        self.amp_walk_std * self.amp_walk_std
    }

    pub fn budget(&self, stage: usize) -> T {
        self.budgets[stage - 1]
    }

    pub fn uses_last_stage_weights(&self) -> bool {
        let n = self.stage_weights.len();
        n > 0
            && self.stage_weights[n - 1] > T::zero()
            && self.stage_weights[..n - 1].iter().all(|w| *w == T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        let unit_interval = |x: T| x >= T::zero() && x <= T::one();
        if self.num_cells == 0 {
            return cfg("num_cells must be positive");
        }
        for (name, v) in [
            ("prior_prob", self.prior_prob),
            ("stay_prob", self.stay_prob),
            ("death_prob", self.death_prob),
            ("birth_prob", self.birth_prob),
        ] {
            if !unit_interval(v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.amp_std >= T::zero()) || !(self.amp_walk_std >= T::zero()) {
            return cfg("amp_std and amp_walk_std must be nonnegative");
        }
        if !(self.noise_var > T::zero()) || !self.noise_var.is_finite() {
            return cfg("noise_var must be positive");
        }
        if !self.amp_mean.is_finite() {
            return cfg("amp_mean must be finite");
        }
        if self.neighbor_count != 2 && self.neighbor_count != 4 {
            return cfg("neighbor_count must be 2 or 4");
        }
        if self.neighbor_count == 4 {
            torus_side(self.num_cells)?;
        }
        if self.horizon == 0 {
            return cfg("horizon must be positive");
        }
        if self.budgets.len() != self.horizon {
            return cfg("budgets must have one entry per stage");
        }
        if self.budgets.iter().any(|b| !(*b > T::zero()) || !b.is_finite()) {
            return cfg("budgets must be positive and finite");
        }
        if self.stage_weights.len() != self.horizon {
            return cfg("stage_weights must have one entry per stage");
        }
        if self.stage_weights.iter().any(|w| !(*w >= T::zero())) {
            return cfg("stage_weights must be nonnegative");
        }
        if !self.stage_weights.iter().any(|w| *w > T::zero()) {
            return cfg("stage_weights needs a positive entry");
        }
        match &self.observability {
            ObservabilityMask::All => {}
            ObservabilityMask::Stages(s) if s.len() != self.horizon => {
                return cfg("observability must have one entry per stage");
            }
            ObservabilityMask::Cells(rows)
                if rows.len() != self.horizon
                    || rows.iter().any(|r| r.len() != self.num_cells) =>
            {
                return cfg("observability must be a horizon x num_cells mask");
            }
            _ => {}
        }
        Ok(())
    }
}

pub fn last_stage_weights<T: Real>(horizon: usize) -> Vec<T> {
    let mut w = vec![T::zero(); horizon];
    if let Some(last) = w.last_mut() {
        *last = T::one();
    }
    w
}

fn torus_side(q: usize) -> Result<usize> {
    let side = (q as f64).sqrt().round() as usize;
    if side * side != q {
        return Err(Error::Config(format!(
            "neighbor_count 4 needs a square number of cells, got {q}"
        )));
    }
    Ok(side)
}

/// Neighbours of `cell`: a ring for `G = 2`, a row-major torus for `G = 4`.
pub fn neighbor_set<T: Real>(params: &ModelParams<T>, cell: usize) -> Result<Vec<usize>> {
    if cell >= params.num_cells {
        return Err(Error::Contract(format!("cell {cell} out of range")));
    }
    neighbors_of(params.num_cells, params.neighbor_count, cell)
}

fn neighbors_of(q: usize, g: usize, cell: usize) -> Result<Vec<usize>> {
    match g {
        2 => Ok(vec![(cell + q - 1) % q, (cell + 1) % q]),
        4 => {
            let n = torus_side(q)?;
            let (r, c) = (cell / n, cell % n);
            Ok(vec![
                ((r + n - 1) % n) * n + c,
                r * n + (c + n - 1) % n,
                r * n + (c + 1) % n,
                ((r + 1) % n) * n + c,
            ])
        }
        _ => Err(Error::Config("neighbor_count must be 2 or 4".into())),
    }
}

/// Validated parameters with a precomputed adjacency table.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    adjacency: Vec<usize>,
}

impl<T: Real> Model<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        let (q, g) = (params.num_cells, params.neighbor_count);
        let mut adjacency = Vec::with_capacity(q * g);
        for cell in 0..q {
            adjacency.extend(neighbors_of(q, g, cell)?);
        }
        Ok(Self { params, adjacency })
    }

    pub fn num_cells(&self) -> usize {
        self.params.num_cells
    }

    pub fn neighbors(&self, cell: usize) -> &[usize] {
        let g = self.params.neighbor_count;
        &self.adjacency[cell * g..(cell + 1) * g]
    }

    /// Closed neighbourhood `H(cell)`, self first.
    pub fn vicinity(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(cell).chain(self.neighbors(cell).iter().copied())
    }

    fn claim(&self, claims: &mut [u16], cell: usize) {
        for j in self.vicinity(cell) {
            claims[j] += 1;
        }
    }

    fn release(&self, claims: &mut [u16], cell: usize) {
        for j in self.vicinity(cell) {
            claims[j] -= 1;
        }
    }

    fn is_free(&self, claims: &[u16], cell: usize) -> bool {
        self.vicinity(cell).all(|j| claims[j] == 0)
    }

    fn claims_of(&self, targets: &[Target<T>]) -> Vec<u16> {
        let mut claims = vec![0u16; self.num_cells()];
        for t in targets {
            self.claim(&mut claims, t.cell);
        }
        claims
    }

    /// True when no two targets share a closed neighbourhood.
    pub fn is_collision_free(&self, scene: &SceneState<T>) -> bool {
        let mut claims = vec![0u16; self.num_cells()];
        for t in &scene.targets {
            if !self.is_free(&claims, t.cell) {
                return false;
            }
            self.claim(&mut claims, t.cell);
        }
        true
    }

    /// Independent Bernoulli(p0) draw per cell, before collision rejection.
    pub fn draw_candidate_cells<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let p0 = self.params.prior_prob.as_f64();
        (0..self.num_cells()).filter(|_| unit(rng) < p0).collect()
    }

    /// Keeps candidates in cell order, dropping any that collide with an earlier keeper.
    pub fn reject_collisions(&self, candidates: &[usize]) -> Vec<usize> {
        let mut claims = vec![0u16; self.num_cells()];
        let mut kept = Vec::with_capacity(candidates.len());
        for &c in candidates {
            if self.is_free(&claims, c) {
                self.claim(&mut claims, c);
                kept.push(c);
            }
        }
        kept
    }

    pub fn sample_initial_scene<R: Rng + ?Sized>(&self, rng: &mut R) -> SceneState<T> {
        let kept = self.reject_collisions(&self.draw_candidate_cells(rng));
        let p = &self.params;
        let targets = kept
            .into_iter()
            .map(|cell| Target {
                cell,
                amplitude: p.amp_mean + p.amp_std * std_normal::<T, _>(rng),
            })
            .collect();
        SceneState {
            stage: 1,
            num_cells: self.num_cells(),
            targets,
        }
    }

    pub fn step_scene<R: Rng + ?Sized>(&self, scene: &SceneState<T>, rng: &mut R) -> SceneState<T> {
        let p = &self.params;
        let g = p.neighbor_count;
        let alpha = p.death_prob.as_f64();
        let pi0 = p.stay_prob.as_f64();

        let mut targets: Vec<Target<T>> = scene
            .targets
            .iter()
            .filter(|_| unit(rng) >= alpha)
            .cloned()
            .collect();

        let mut claims = self.claims_of(&targets);
        for t in targets.iter_mut() {
            let u = unit(rng);
            if u < pi0 {
                continue;
            }
            let k = (((u - pi0) / (1.0 - pi0)) * g as f64) as usize;
            let dest = self.neighbors(t.cell)[k.min(g - 1)];
            self.release(&mut claims, t.cell);
            if self.is_free(&claims, dest) {
                t.cell = dest;
            }
            self.claim(&mut claims, t.cell);
        }

        for t in targets.iter_mut() {
            t.amplitude += p.amp_walk_std * std_normal::<T, _>(rng);
        }

        if unit(rng) < p.birth_prob.as_f64() {
            for _ in 0..BIRTH_RETRIES {
                let cell = rng.random_range(0..self.num_cells());
                if self.is_free(&claims, cell) {
                    targets.push(Target {
                        cell,
                        amplitude: p.amp_mean + p.amp_std * std_normal::<T, _>(rng),
                    });
                    break;
                }
            }
        }

        targets.sort_by_key(|t| t.cell);
        SceneState {
            stage: scene.stage + 1,
            num_cells: scene.num_cells,
            targets,
        }
    }

    /// `y_i = sqrt(lambda_i) I_i theta_i + n_i`; dark cells yield `NaN` and `observed = false`.
    ///
    /// One noise sample is drawn per cell regardless of effort or observability, so the noise
    /// stream is aligned across policies.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        scene: &SceneState<T>,
        alloc: &Allocation<T>,
        rng: &mut R,
    ) -> Observation<T> {
        let q = self.num_cells();
        let stage = alloc.stage;
        let sigma = self.params.noise_var.sqrt();
        let mut signal = vec![T::zero(); q];
        for t in &scene.targets {
            signal[t.cell] = t.amplitude;
        }
        let observed = self.params.observability.stage_row(stage, q);
        let values = (0..q)
            .map(|i| {
                let n = sigma * std_normal::<T, _>(rng);
                if observed[i] {
                    alloc.lambda[i].sqrt() * signal[i] + n
                } else {
                    T::nan()
                }
            })
            .collect();
        Observation {
            stage,
            values,
            effort: alloc.lambda.clone(),
            observed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target<T> {
    pub cell: usize,
    pub amplitude: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState<T> {
    pub stage: usize,
    pub num_cells: usize,
    /// Sorted by cell.
    pub targets: Vec<Target<T>>,
}

impl<T: Real> SceneState<T> {
    pub fn empty(num_cells: usize, stage: usize) -> Self {
        Self {
            stage,
            num_cells,
            targets: Vec::new(),
        }
    }

    pub fn occupancy(&self) -> Vec<bool> {
        let mut occ = vec![false; self.num_cells];
        for t in &self.targets {
            occ[t.cell] = true;
        }
        occ
    }

    pub fn cells(&self) -> Vec<usize> {
        self.targets.iter().map(|t| t.cell).collect()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn set_amplitudes(&mut self, theta: T) {
        for t in self.targets.iter_mut() {
            t.amplitude = theta;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub stage: usize,
    pub values: Vec<T>,
    pub effort: Vec<T>,
    pub observed: Vec<bool>,
}

pub fn sample_initial_scene<T: Real, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    rng: &mut R,
) -> Result<SceneState<T>> {
    Ok(Model::new(params.clone())?.sample_initial_scene(rng))
}

pub fn step_scene<T: Real, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    scene: &SceneState<T>,
    rng: &mut R,
) -> Result<SceneState<T>> {
    Ok(Model::new(params.clone())?.step_scene(scene, rng))
}

pub fn observe<T: Real, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    scene: &SceneState<T>,
    alloc: &Allocation<T>,
    rng: &mut R,
) -> Result<Observation<T>> {
    Ok(Model::new(params.clone())?.observe(scene, alloc, rng))
}
