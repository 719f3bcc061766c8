//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, SweepParam, TrainMethod, BOUNDS_HEADER, PLOT_HEADER, SWEEP_HEADER};
use crate::config::{parse_range, parse_values, PolicySpec, ScenarioConfig, ScenarioSpec};
use crate::error::{HarnessError, Result};
use crate::output::{write_json, write_run, write_table, ScheduleFile};

#[derive(Debug, Parser)]
#[command(name = "darap", version, about = "Adaptive search and tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an offline rollout or myopic+ schedule and write schedule.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// offline_rollout or myopic_plus.
        #[arg(long, default_value = "offline_rollout")]
        method: String,
    },
    /// Evaluate a policy against uniform allocation and write metrics files.
    Run {
        #[command(flatten)]
        common: Common,
        /// Pre-trained schedule.json to evaluate instead of training.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Tabulate the oracle gain bounds over an SNR grid.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep pi0, beta or SNR and report gains over uniform.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// pi0, beta or snr.
        #[arg(long)]
        param: String,
        /// Comma-separated values or `start:stop:step` ranges.
        #[arg(long)]
        values: String,
        /// Comma-separated policy names.
        #[arg(long, default_value = "myopic,myopic_plus")]
        policies: String,
    },
    /// Per-stage series for external plotting.
    Plotdata {
        #[command(flatten)]
        common: Common,
        /// Comma-separated policy names.
        #[arg(long, default_value = "uniform,myopic,myopic_plus")]
        policies: String,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// A value, or `start:stop:step` for bounds and plotdata.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    policy: Option<String>,
    /// standard, mismatch or missing.
    #[arg(long)]
    scenario: Option<String>,
    /// Mismatch amplitude.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    /// Rollout base length.
    #[arg(long)]
    t0: Option<usize>,
    /// Myopic+ cost tolerance.
    #[arg(long)]
    rho: Option<f64>,
    /// Monte Carlo samples per training estimate.
    #[arg(long)]
    num_mc: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    num_cells: Option<usize>,
}

impl Common {
    /// Loads the configuration and applies flag overrides. Returns it with the SNR grid.
    fn config(&self) -> Result<(ScenarioConfig, Vec<f64>)> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(n) = self.num_mc {
            cfg.training.num_mc = n;
        }
        if let Some(h) = self.horizon {
            cfg.model.horizon = h;
            cfg.model.budgets = None;
            cfg.model.stage_weights = None;
        }
        if let Some(q) = self.num_cells {
            cfg.model.num_cells = q;
            cfg.model.budgets = None;
        }
        if let Some(name) = &self.scenario {
            cfg.scenario = ScenarioSpec::from_name(name, self.theta0)?;
        } else if let (ScenarioSpec::Mismatch { theta0 }, Some(t)) = (&mut cfg.scenario, self.theta0) {
            *theta0 = t;
        }
        if let Some(name) = &self.policy {
            cfg.policy = PolicySpec::from_name(name)?;
        }
        self.apply_policy_params(&mut cfg.policy);
        let snrs = match &self.snr_db {
            Some(text) => {
                let v = parse_range(text)?;
                cfg.snr_db = v[0];
                cfg.model.budgets = None;
                v
            }
            None => vec![cfg.snr_db],
        };
        Ok((cfg, snrs))
    }

    fn apply_policy_params(&self, policy: &mut PolicySpec) {
        match policy {
            PolicySpec::OfflineRollout { t0 } | PolicySpec::OnlineRollout { t0 } => {
                if let Some(v) = self.t0 {
                    *t0 = v;
                }
            }
            PolicySpec::MyopicPlus { rho } => {
                if let Some(v) = self.rho {
                    *rho = v;
                }
            }
            _ => {}
        }
    }

    fn policies(&self, list: &str) -> Result<Vec<PolicySpec>> {
        list.split(',')
            .map(|name| {
                let mut p = PolicySpec::from_name(name.trim())?;
                self.apply_policy_params(&mut p);
                Ok(p)
            })
            .collect()
    }

    fn single_snr(&self, snrs: &[f64]) -> Result<()> {
        if snrs.len() == 1 {
            Ok(())
        } else {
            Err(HarnessError::Usage("--snr-db takes a single value for this subcommand".into()))
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(0) => Err(HarnessError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Usage(e.to_string()))?
            .install(f),
        None => f(),
    }
}

fn report_written(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { common, method } => {
            let (mut cfg, snrs) = common.config()?;
            common.single_snr(&snrs)?;
            let mut spec = match TrainMethod::from_name(&method)? {
                TrainMethod::OfflineRollout => PolicySpec::OfflineRollout { t0: 5 },
                TrainMethod::MyopicPlus => PolicySpec::MyopicPlus { rho: darap_core::policy::DEFAULT_RHO },
            };
            common.apply_policy_params(&mut spec);
            cfg.policy = spec.clone();
            let file = with_threads(common.threads, || commands::train(&cfg, &spec))?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("schedule.json");
            write_json(&path, &file)?;
            report_written(&path);
        }
        Command::Run { common, schedule } => {
            let (cfg, snrs) = common.config()?;
            common.single_snr(&snrs)?;
            let schedule = schedule.as_deref().map(ScheduleFile::load).transpose()?;
            if schedule.is_none() && matches!(&cfg.policy, PolicySpec::Darap { kappas } if kappas.is_empty()) {
                return Err(HarnessError::Usage("policy darap needs --schedule or policy.kappas".into()));
            }
            let (report, run) = with_threads(common.threads, || commands::run(&cfg, schedule.as_ref()))?;
            write_run(&common.out, &report)?;
            eprintln!(
                "{}: weighted MSE gain {} dB over {} trials ({:.2} s)",
                report.policy.policy,
                report.mse_gain.map(|g| format!("{:.3}", g.db)).unwrap_or_else(|| "n/a".into()),
                report.trials,
                run.wall_time.as_secs_f64()
            );
            report_written(&common.out);
        }
        Command::Bounds { common } => {
            let (cfg, snrs) = common.config()?;
            let rows = commands::bounds_table(&cfg, &snrs)?;
            let path = common.out.join("bounds.csv");
            write_table(&path, &BOUNDS_HEADER, &rows)?;
            report_written(&path);
        }
        Command::Sweep { common, param, values, policies } => {
            let (cfg, _) = common.config()?;
            let param = SweepParam::from_name(&param)?;
            let values = parse_values(&values)?;
            let policies = common.policies(&policies)?;
            let rows = with_threads(common.threads, || commands::sweep(&cfg, param, &values, &policies))?;
            let path = common.out.join("sweep.csv");
            write_table(&path, &SWEEP_HEADER, &rows)?;
            report_written(&path);
        }
        Command::Plotdata { common, policies } => {
            let (cfg, snrs) = common.config()?;
            let policies = common.policies(&policies)?;
            let rows = with_threads(common.threads, || commands::plotdata(&cfg, &snrs, &policies))?;
            let path = common.out.join("plotdata.csv");
            write_table(&path, &PLOT_HEADER, &rows)?;
            report_written(&path);
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the subcommand and returns the exit code.
pub fn execute<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
