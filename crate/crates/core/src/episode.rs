//! Closed-loop simulation: allocate, observe, update, record cost, predict, advance the scene.
//!
//! An [`Episode`] is a cloneable snapshot, which lets training code fork many continuations
//! from a shared prefix.

use crate::allocator::{darap_allocate, myopic_allocate, omniscient_allocate, Allocation};
use crate::belief::{belief_init, belief_predict, belief_update, oracle_belief, BeliefState, OracleKnowledge, OracleTrack};
use crate::model::{Model, SceneState};
use crate::policy::per_stage_cost;
use crate::rng::{SimRng, TrialStreams};
use crate::{Real, Result};

/// How the effort of one stage is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action<T> {
    /// D-ARAP blend on the filter belief.
    Kappa(T),
    Omniscient,
    SemiOmniscient,
}

/// Everything observable about one simulated stage.
#[derive(Debug, Clone)]
pub struct StageRecord<T> {
    pub stage: usize,
    /// `M_t` evaluated on the belief the allocation was planned with.
    pub cost: T,
    pub allocation: Allocation<T>,
    /// Filter occupancy probabilities after the stage-`t` measurement.
    pub updated_probs: Vec<T>,
    pub target_cells: Vec<usize>,
    pub true_amplitudes: Vec<T>,
    /// Filter conditional-mean amplitude estimates at the target cells.
    pub filter_estimates: Vec<T>,
    /// Oracle estimates at the target cells, when oracle tracking is enabled.
    pub oracle_estimates: Option<Vec<T>>,
    /// Oracle posterior variances at the target cells, when oracle tracking is enabled.
    pub oracle_post_vars: Option<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct Episode<'a, T> {
    pub model: &'a Model<T>,
    pub stage: usize,
    pub scene: SceneState<T>,
    /// Filter belief predicted for `stage`.
    pub belief: BeliefState<T>,
    /// Oracle moments predicted for `stage`.
    pub track: Option<OracleTrack<T>>,
    /// `Psi(stage - 1)`.
    pub previous_cells: Option<Vec<usize>>,
    /// `M_t` for every completed stage.
    pub costs: Vec<T>,
    pub amplitude_override: Option<T>,
    scene_rng: SimRng,
    noise_rng: SimRng,
}

impl<'a, T: Real> Episode<'a, T> {
    /// Fresh episode for trial `trial` under root seed `root`.
    pub fn new(model: &'a Model<T>, root: u64, trial: u64, oracle_tracking: bool) -> Result<Self> {
        let mut streams = TrialStreams::new(root, trial);
        let scene = model.sample_initial_scene(&mut streams.scene);
        Self::with_scene(model, scene, streams, oracle_tracking)
    }

    pub fn with_scene(
        model: &'a Model<T>,
        scene: SceneState<T>,
        streams: TrialStreams,
        oracle_tracking: bool,
    ) -> Result<Self> {
        let belief = belief_init(&model.params)?;
        Ok(Self::from_belief(model, scene, belief, streams, oracle_tracking))
    }

    /// Starts mid-horizon from an arbitrary predicted belief; the scene stage is aligned to it.
    pub fn from_belief(
        model: &'a Model<T>,
        mut scene: SceneState<T>,
        belief: BeliefState<T>,
        streams: TrialStreams,
        oracle_tracking: bool,
    ) -> Self {
        scene.stage = belief.stage;
        Self {
            model,
            stage: belief.stage,
            scene,
            belief,
            track: oracle_tracking.then(|| OracleTrack::init(&model.params)),
            previous_cells: None,
            costs: Vec::new(),
            amplitude_override: None,
            scene_rng: streams.scene,
            noise_rng: streams.noise,
        }
    }

    /// Replaces every true amplitude with `theta` from now on.
    pub fn override_amplitudes(&mut self, theta: T) {
        self.amplitude_override = Some(theta);
        self.scene.set_amplitudes(theta);
    }

    pub fn is_done(&self) -> bool {
        self.stage > self.model.params.horizon
    }

    fn oracle_belief(&self, knowledge: OracleKnowledge) -> Result<BeliefState<T>> {
        let track = match &self.track {
            Some(t) => t.clone(),
            None => OracleTrack::init(&self.model.params),
        };
        oracle_belief(self.model, &knowledge, &track)
    }

    pub fn step(&mut self, action: Action<T>) -> Result<StageRecord<T>> {
        let params = &self.model.params;
        let t = self.stage;
        let budget = params.budget(t);
        let noise_var = params.noise_var;

        let (planning, allocation) = match action {
            Action::Kappa(kappa) => {
                let alloc = darap_allocate(&self.belief, budget, kappa, noise_var)?;
                (None, alloc)
            }
            Action::Omniscient => {
                let ob = self.oracle_belief(OracleKnowledge::omniscient(t, self.scene.cells()))?;
                let alloc = omniscient_allocate(&self.scene, budget);
                (Some(ob), alloc)
            }
            Action::SemiOmniscient => {
                let ob = self.oracle_belief(OracleKnowledge::semi_omniscient(t, self.previous_cells.clone()))?;
                let alloc = myopic_allocate(&ob, budget, noise_var)?;
                (Some(ob), alloc)
            }
        };
        let cost = per_stage_cost(planning.as_ref().unwrap_or(&self.belief), &allocation, noise_var)?;

        let obs = self.model.observe(&self.scene, &allocation, &mut self.noise_rng);
        let updated = belief_update(params, &self.belief, &obs)?;
        let track_post = self.track.as_ref().map(|tr| tr.update(params, &obs));

        let target_cells = self.scene.cells();
        let record = StageRecord {
            stage: t,
            cost,
            updated_probs: updated.probs.clone(),
            true_amplitudes: self.scene.targets.iter().map(|x| x.amplitude).collect(),
            filter_estimates: target_cells.iter().map(|&c| updated.means[c]).collect(),
            oracle_estimates: track_post.as_ref().map(|tr| target_cells.iter().map(|&c| tr.means[c]).collect()),
            oracle_post_vars: track_post.as_ref().map(|tr| target_cells.iter().map(|&c| tr.vars[c]).collect()),
            target_cells,
            allocation,
        };
        self.costs.push(cost);

        self.belief = belief_predict(self.model, &updated)?;
        self.track = track_post.map(|tr| tr.predict(self.model, &record.target_cells));
        self.previous_cells = Some(record.target_cells.clone());
        self.scene = self.model.step_scene(&self.scene, &mut self.scene_rng);
        if let Some(theta) = self.amplitude_override {
            self.scene.set_amplitudes(theta);
        }
        self.stage += 1;
        Ok(record)
    }

    /// Runs one D-ARAP stage per entry of `kappas`.
    pub fn run_kappas(&mut self, kappas: &[T]) -> Result<()> {
        for &k in kappas {
            self.step(Action::Kappa(k))?;
        }
        Ok(())
    }
}
