//! Result files: `metrics.json`, `per-stage.csv`, `detection.csv`, `schedule.json` and the
//! bound/sweep tables.

use std::fs;
use std::path::Path;

use darap_core::policy::Provenance;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::evaluate::{PairedGain, PolicySummary};
use crate::runner::CURVE_THRESHOLDS;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub snr_db: f64,
    pub num_cells: usize,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub pfa: f64,
    /// Weighted-MSE gain over the uniform baseline on the same trials.
    pub mse_gain: Option<PairedGain>,
    pub final_stage_mse_gain: Option<PairedGain>,
    pub cost_gain: Option<PairedGain>,
    pub policy: PolicySummary,
    pub baseline: PolicySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub schema_version: u32,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub snr_db: f64,
    pub kappas: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
    pub num_mc: usize,
}

impl ScheduleFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let file: Self = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| HarnessError::Config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
        if file.kappas.len() != file.horizon {
            return Err(HarnessError::Config(format!("{}: kappas length differs from T", path.display())));
        }
        Ok(file)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_run(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("metrics.json"), report)?;

    let mut w = csv::Writer::from_path(dir.join("per-stage.csv"))?;
    w.write_record([
        "stage",
        "mse",
        "mse_se",
        "mse_uniform",
        "mse_gain_db",
        "mean_targets",
        "cost",
        "cost_uniform",
        "mean_kappa",
        "pd_at_pfa",
        "pd_at_pfa_uniform",
    ])?;
    for (p, u) in report.policy.stages.iter().zip(&report.baseline.stages) {
        let gain = match (p.mse, u.mse) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(10.0 * (b / a).log10()),
            _ => None,
        };
        w.write_record([
            p.stage.to_string(),
            opt(p.mse),
            opt(p.mse_se),
            opt(u.mse),
            opt(gain),
            p.mean_targets.to_string(),
            p.cost.to_string(),
            u.cost.to_string(),
            p.mean_kappa.to_string(),
            opt(p.pd_at_pfa),
            opt(u.pd_at_pfa),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("detection.csv"))?;
    w.write_record(["stage", "threshold", "pd", "pfa", "pd_uniform", "pfa_uniform"])?;
    for (p, u) in report.policy.stages.iter().zip(&report.baseline.stages) {
        for (j, th) in CURVE_THRESHOLDS.iter().enumerate() {
            w.write_record([
                p.stage.to_string(),
                th.to_string(),
                opt(p.curve_pd[j]),
                p.curve_pfa[j].to_string(),
                opt(u.curve_pd[j]),
                u.curve_pfa[j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes rows of already formatted cells under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
