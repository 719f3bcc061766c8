//! Subcommand implementations, independent of argument parsing.

use darap_core::bounds::{
    bound_omniscient_dynamic, bound_omniscient_static, bound_semi_dynamic, bound_semi_small, combined_bound,
    BoundInputs,
};
use darap_core::model::Model;
use darap_core::policy::{KappaSchedule, Provenance};
use serde::Serialize;

use crate::config::{PolicySpec, ScenarioConfig, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::evaluate::{cost_gain, evaluate, mse_gain, stage_mse_gain, summarize, PolicyRun};
use crate::output::{RunReport, ScheduleFile};
use crate::runner::{prepare_policy, training_seed, Experiment, ResolvedPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    OfflineRollout,
    MyopicPlus,
}

impl TrainMethod {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "offline_rollout" => Ok(Self::OfflineRollout),
            "myopic_plus" => Ok(Self::MyopicPlus),
            other => Err(HarnessError::Usage(format!(
                "unknown training method `{other}` (expected offline_rollout or myopic_plus)"
            ))),
        }
    }
}

/// Trains an offline rollout or myopic+ schedule.
pub fn train(cfg: &ScenarioConfig, spec: &PolicySpec) -> Result<ScheduleFile> {
    if !matches!(spec, PolicySpec::OfflineRollout { .. } | PolicySpec::MyopicPlus { .. }) {
        return Err(HarnessError::Usage(format!("policy `{}` is not trainable", spec.name())));
    }
    let model = Model::new(cfg.model_params()?)?;
    let ResolvedPolicy::Schedule { schedule, .. } = prepare_policy(&model, spec, cfg)? else {
        unreachable!("trainable policies resolve to schedules")
    };
    Ok(ScheduleFile {
        schema_version: SCHEMA_VERSION,
        horizon: schedule.kappas.len(),
        snr_db: cfg.snr_db,
        kappas: schedule.kappas,
        provenance: schedule.provenance,
        seed: training_seed(cfg),
        num_mc: cfg.training.num_mc,
    })
}

pub fn resolve(exp: &Experiment, cfg: &ScenarioConfig, schedule: Option<&ScheduleFile>) -> Result<ResolvedPolicy> {
    match schedule {
        Some(file) => {
            if file.horizon != exp.model.params.horizon {
                return Err(HarnessError::Config(format!(
                    "schedule has T = {}, model horizon is {}",
                    file.horizon, exp.model.params.horizon
                )));
            }
            let name = match file.provenance {
                Provenance::OfflineRollout { .. } => "offline_rollout",
                Provenance::MyopicPlus { .. } => "myopic_plus",
                Provenance::OnlineRollout { .. } => "online_rollout",
                Provenance::Myopic => "myopic",
                Provenance::Manual => "darap",
            };
            Ok(ResolvedPolicy::Schedule {
                name: name.into(),
                schedule: KappaSchedule { kappas: file.kappas.clone(), provenance: file.provenance.clone() },
            })
        }
        None => prepare_policy(&exp.model, &cfg.policy, cfg),
    }
}

/// Runs the configured policy and the uniform baseline on the same trials.
pub fn run(cfg: &ScenarioConfig, schedule: Option<&ScheduleFile>) -> Result<(RunReport, PolicyRun)> {
    let exp = Experiment::from_config(cfg)?;
    let policy = resolve(&exp, cfg, schedule)?;
    let horizon = exp.model.params.horizon;
    let baseline = evaluate(&exp, &ResolvedPolicy::uniform(horizon))?;
    let run = if policy.name() == "uniform" { baseline.clone() } else { evaluate(&exp, &policy)? };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.name().into(),
        snr_db: cfg.snr_db,
        num_cells: exp.model.num_cells(),
        horizon,
        trials: exp.trials,
        seed: exp.seed,
        pfa: exp.pfa,
        mse_gain: mse_gain(&baseline, &run),
        final_stage_mse_gain: stage_mse_gain(&baseline, &run, horizon),
        cost_gain: cost_gain(&baseline, &run),
        policy: summarize(&run, exp.pfa)?,
        baseline: summarize(&baseline, exp.pfa)?,
    };
    Ok((report, run))
}

pub const BOUNDS_HEADER: [&str; 11] = [
    "snr_db",
    "prop3",
    "prop4",
    "condition_flag",
    "combined",
    "combined_db",
    "prop1",
    "prop5",
    "prop5_condition",
    "r_plus",
    "stay_assumption",
];

/// Bound values on an SNR grid, using the configured model with a constant budget.
pub fn bounds_table(cfg: &ScenarioConfig, snrs: &[f64]) -> Result<Vec<Vec<String>>> {
    let mut base = cfg.clone();
    base.model.budgets = None;
    let mut rows = Vec::with_capacity(snrs.len());
    for &snr in snrs {
        base.snr_db = snr;
        let inputs = BoundInputs::from_params(&base.model_params()?);
        let o = bound_omniscient_dynamic(&inputs);
        let s = bound_semi_dynamic(&inputs);
        let c = combined_bound(&inputs);
        let small = bound_semi_small(&inputs);
        let mut static_inputs = inputs.clone();
        static_inputs.walk_var = 0.0;
        rows.push(vec![
            snr.to_string(),
            o.value.to_string(),
            s.value.to_string(),
            u8::from(s.condition_satisfied).to_string(),
            c.value.to_string(),
            (10.0 * c.value.log10()).to_string(),
            bound_omniscient_static(&static_inputs).value.to_string(),
            small.value.to_string(),
            u8::from(small.condition_satisfied).to_string(),
            inputs.r_plus().to_string(),
            u8::from(inputs.stay_assumption_holds()).to_string(),
        ]);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    StayProb,
    BirthProb,
    Snr,
}

impl SweepParam {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "pi0" | "stay_prob" => Ok(Self::StayProb),
            "beta" | "birth_prob" => Ok(Self::BirthProb),
            "snr" | "snr_db" => Ok(Self::Snr),
            other => Err(HarnessError::Usage(format!("unknown sweep parameter `{other}` (pi0, beta or snr)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::StayProb => "pi0",
            Self::BirthProb => "beta",
            Self::Snr => "snr_db",
        }
    }

    /// Applies one sweep value. Births are balanced by `alpha = beta / (p0 Q)` so the expected
    /// number of targets stays constant.
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            Self::StayProb => cfg.model.stay_prob = value,
            Self::BirthProb => {
                cfg.model.birth_prob = value;
                cfg.model.death_prob = value / (cfg.model.prior_prob * cfg.model.num_cells as f64);
            }
            Self::Snr => {
                cfg.snr_db = value;
                cfg.model.budgets = None;
            }
        }
    }
}

pub const SWEEP_HEADER: [&str; 9] = [
    "param",
    "value",
    "policy",
    "mse_gain_db",
    "mse_gain_se_db",
    "final_mse",
    "final_mse_uniform",
    "cost_gain_db",
    "final_pd_at_pfa",
];

/// Evaluates `policies` against uniform at every sweep value.
pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64], policies: &[PolicySpec]) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        param.apply(&mut c, v);
        let exp = Experiment::from_config(&c)?;
        let horizon = exp.model.params.horizon;
        let baseline = evaluate(&exp, &ResolvedPolicy::uniform(horizon))?;
        let base_summary = summarize(&baseline, exp.pfa)?;
        for spec in policies {
            let policy = prepare_policy(&exp.model, spec, &c)?;
            let run = evaluate(&exp, &policy)?;
            let s = summarize(&run, exp.pfa)?;
            let g = mse_gain(&baseline, &run);
            rows.push(vec![
                param.name().to_string(),
                v.to_string(),
                spec.name().to_string(),
                g.map(|g| g.db.to_string()).unwrap_or_default(),
                g.map(|g| g.se_db.to_string()).unwrap_or_default(),
                s.final_mse.map(|m| m.to_string()).unwrap_or_default(),
                base_summary.final_mse.map(|m| m.to_string()).unwrap_or_default(),
                cost_gain(&baseline, &run).map(|g| g.db.to_string()).unwrap_or_default(),
                s.stages.last().and_then(|st| st.pd_at_pfa).map(|p| p.to_string()).unwrap_or_default(),
            ]);
        }
    }
    Ok(rows)
}

pub const PLOT_HEADER: [&str; 10] = [
    "snr_db",
    "policy",
    "stage",
    "mse",
    "mse_uniform",
    "mse_gain_db",
    "cost",
    "pd_at_pfa",
    "mean_kappa",
    "combined_bound_db",
];

/// Per-stage series for every SNR and policy on a common stage grid.
pub fn plotdata(cfg: &ScenarioConfig, snrs: &[f64], policies: &[PolicySpec]) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &snr in snrs {
        let mut c = cfg.clone();
        SweepParam::Snr.apply(&mut c, snr);
        let exp = Experiment::from_config(&c)?;
        let bound = combined_bound(&BoundInputs::from_params(&exp.model.params)).value;
        let baseline = evaluate(&exp, &ResolvedPolicy::uniform(exp.model.params.horizon))?;
        let base = summarize(&baseline, exp.pfa)?;
        for spec in policies {
            let s = if *spec == PolicySpec::Uniform {
                base.clone()
            } else {
                summarize(&evaluate(&exp, &prepare_policy(&exp.model, spec, &c)?)?, exp.pfa)?
            };
            for (st, u) in s.stages.iter().zip(&base.stages) {
                let gain = match (st.mse, u.mse) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => (10.0 * (b / a).log10()).to_string(),
                    _ => String::new(),
                };
                rows.push(vec![
                    snr.to_string(),
                    spec.name().to_string(),
                    st.stage.to_string(),
                    st.mse.map(|m| m.to_string()).unwrap_or_default(),
                    u.mse.map(|m| m.to_string()).unwrap_or_default(),
                    gain,
                    st.cost.to_string(),
                    st.pd_at_pfa.map(|p| p.to_string()).unwrap_or_default(),
                    st.mean_kappa.to_string(),
                    (10.0 * bound.log10()).to_string(),
                ]);
            }
        }
    }
    Ok(rows)
}
