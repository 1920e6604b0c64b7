//! The simulate, tune and compare workflows.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use dcmg_core::control::{build_initial_fis, ControllerConfig, ControllerKind};
use dcmg_core::fis::FisDefinition;
use dcmg_core::scenario::{MetricsReport, Regime, RunLog, ScenarioSpec};
use dcmg_core::sim::{ClosedLoop, SimError, SimSettings, Stabilizer};
use dcmg_core::tuner::{decode_fis, param_names, Bounds, TuneResult, TuningProblem};

use crate::config::RunConfig;
use crate::exit;

/// Fraction of post-settling samples that must lie inside the 1 % band.
pub const REGULATION_THRESHOLD: f64 = 0.95;
/// Largest acceptable tuned-to-PI battery throughput ratio.
pub const Q_SEPARATION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0:#}")]
    Config(anyhow::Error),
    #[error("simulation diverged at t = {t:.6} s: {message}")]
    Divergence { t: f64, message: String },
    #[error("tuned fuzzy system not found: {0}")]
    MissingFis(String),
    #[error("{0:#}")]
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Divergence { .. } => exit::DIVERGENCE,
            CliError::MissingFis(_) => exit::MISSING_FIS,
            CliError::Other(_) => exit::FAILURE,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e.divergence_time() {
            Some(t) => CliError::Divergence {
                t,
                message: e.to_string(),
            },
            None => CliError::Config(e.into()),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn io<T>(r: anyhow::Result<T>) -> Result<T> {
    r.map_err(CliError::Other)
}

/// Loads a config file and applies command-line overrides.
pub fn load_config(path: &Path, seed: Option<u64>, dt: Option<f64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path).map_err(CliError::Config)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    if let Some(dt) = dt {
        cfg.sim.dt = dt;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Reads a fuzzy system file; a missing file is its own error.
pub fn read_fis(path: &Path) -> Result<FisDefinition> {
    if !path.is_file() {
        return Err(CliError::MissingFis(path.display().to_string()));
    }
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Config)?;
    FisDefinition::from_toml(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(CliError::Config)
}

/// Fuzzy system for a controller kind: the built-in initial system, or the
/// tuned one read from `fis_path`.
pub fn controller_fis(controller: &ControllerConfig) -> Result<Option<FisDefinition>> {
    match (controller.kind, &controller.fis_path) {
        (ControllerKind::Pi, _) => Ok(None),
        (ControllerKind::FuzzyInitial, _) => Ok(Some(build_initial_fis())),
        (ControllerKind::FuzzyTuned, Some(path)) => read_fis(path).map(Some),
        (ControllerKind::FuzzyTuned, None) => Err(CliError::MissingFis("controller.fis_path is not set".into())),
    }
}

fn run_one(
    cfg: &RunConfig,
    settings: &SimSettings,
    controller: &ControllerConfig,
    fis: Option<&FisDefinition>,
    scenario: &ScenarioSpec,
) -> Result<RunLog> {
    let stabilizer = Stabilizer::new(controller.kind, fis)?;
    let closed = ClosedLoop {
        plant: &cfg.plant,
        controller,
        stabilizer: &stabilizer,
        settings,
    };
    Ok(closed.run(scenario)?)
}

fn metrics(cfg: &RunConfig, log: &RunLog) -> Result<MetricsReport> {
    MetricsReport::from_log(log, cfg.plant.v_nominal, cfg.sim.settling).map_err(|e| CliError::Other(e.into()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        io(fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())))?;
    }
    io(File::create(path).with_context(|| format!("creating {}", path.display()))).map(BufWriter::new)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    io(f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .with_context(|| format!("writing {}", path.display())))
}

fn write_log(path: &Path, log: &RunLog) -> Result<()> {
    let mut f = create(path)?;
    io(log
        .write_csv(&mut f)
        .and_then(|_| f.flush())
        .with_context(|| format!("writing {}", path.display())))
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub metrics: MetricsReport,
    pub log_path: PathBuf,
    pub metrics_path: PathBuf,
}

/// One closed-loop run of the configured controller and scenario; writes
/// `log.csv` and `metrics.toml` to the output directory.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let fis = controller_fis(&cfg.controller)?;
    let log = run_one(cfg, &cfg.sim, &cfg.controller, fis.as_ref(), &cfg.scenario.build())?;
    let metrics = metrics(cfg, &log)?;
    let log_path = cfg.output_dir.join("log.csv");
    let metrics_path = cfg.output_dir.join("metrics.toml");
    write_log(&log_path, &log)?;
    write_text(&metrics_path, &metrics.to_toml())?;
    Ok(SimulateOutcome {
        metrics,
        log_path,
        metrics_path,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneSummary {
    pub initial_cost: f64,
    pub best_cost: f64,
    /// Cost of the written tuned system from a fresh simulation.
    pub reevaluated_cost: f64,
    pub evaluations: usize,
    pub population: usize,
    pub iterations: usize,
    pub swarm_seed: u64,
    pub scenario_seed: u64,
    pub regime: Regime,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub summary: TuneSummary,
    pub result: TuneResult,
    pub tuned: FisDefinition,
}

pub const TUNED_FIS_FILE: &str = "tuned.fis.toml";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const TRAJECTORY_FILE: &str = "mf_trajectory.csv";
pub const TUNE_SUMMARY_FILE: &str = "tune_summary.toml";

/// Tunes the output MFs of the configured fuzzy system on the configured
/// scenario and writes the tuned system, the convergence history and the
/// parameter trajectories to `out`.
pub fn tune(cfg: &RunConfig, out: &Path, mut progress: impl FnMut(usize, f64)) -> Result<TuneOutcome> {
    if cfg.controller.kind != ControllerKind::FuzzyInitial {
        return Err(CliError::Config(anyhow::anyhow!(
            "tune needs controller.kind = \"fuzzy_initial\" as its template, got `{}`",
            cfg.controller.kind
        )));
    }
    let template = controller_fis(&cfg.controller)?.expect("fuzzy kind has a system");
    let settings = cfg.tuning_settings();
    let scenario = cfg.scenario.build();
    let problem = TuningProblem {
        template: &template,
        plant: &cfg.plant,
        controller: &cfg.controller,
        settings: &settings,
        scenario: &scenario,
        cost: cfg.tuner.cost,
    };
    let bounds = Bounds::for_fis(&template, cfg.tuner.sigma_bounds).map_err(|e| CliError::Config(e.into()))?;

    let initial_cost = match problem.cost_of(&template) {
        Some(c) => c,
        // rerun to report why the template itself fails
        None => {
            run_one(cfg, &settings, &cfg.controller, Some(&template), &scenario)?;
            return Err(CliError::Other(anyhow::anyhow!(
                "initial fuzzy system has a non-finite cost"
            )));
        }
    };

    let result = problem
        .optimize(&bounds, &cfg.tuner.swarm, &mut progress)
        .map_err(|e| CliError::Config(e.into()))?;
    let tuned = decode_fis(&template, &result.best_params).map_err(|e| CliError::Other(e.into()))?;
    let reevaluated_cost = problem
        .cost_of(&tuned)
        .ok_or_else(|| CliError::Other(anyhow::anyhow!("tuned system failed on re-evaluation")))?;

    let summary = TuneSummary {
        initial_cost,
        best_cost: result.best_cost,
        reevaluated_cost,
        evaluations: result.evaluations,
        population: cfg.tuner.swarm.population,
        iterations: cfg.tuner.swarm.iterations,
        swarm_seed: cfg.tuner.swarm.seed,
        scenario_seed: cfg.scenario.seed,
        regime: cfg.scenario.regime,
        dt: settings.dt,
    };
    write_text(
        &out.join(TUNED_FIS_FILE),
        &tuned.to_toml().map_err(|e| CliError::Other(e.into()))?,
    )?;
    write_text(&out.join(CONVERGENCE_FILE), &convergence_csv(&result))?;
    write_text(&out.join(TRAJECTORY_FILE), &trajectory_csv(&template, &result))?;
    write_text(
        &out.join(TUNE_SUMMARY_FILE),
        &io(toml::to_string(&summary).map_err(Into::into))?,
    )?;
    Ok(TuneOutcome { summary, result, tuned })
}

fn convergence_csv(r: &TuneResult) -> String {
    let mut s = String::from("iteration,best_cost\n");
    for (i, c) in r.history.iter().enumerate() {
        s.push_str(&format!("{},{c:.9e}\n", i + 1));
    }
    s
}

fn trajectory_csv(template: &FisDefinition, r: &TuneResult) -> String {
    let mut s = String::from("iteration");
    for name in param_names(template) {
        s.push(',');
        s.push_str(&name);
    }
    s.push('\n');
    for (i, p) in r.trajectory.iter().enumerate() {
        s.push_str(&(i + 1).to_string());
        for v in p {
            s.push_str(&format!(",{v:.9}"));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub controller: ControllerKind,
    pub regime: Regime,
    pub seed: u64,
    pub regulation_ok: bool,
    pub metrics: MetricsReport,
}

/// Battery throughput of the three controllers on one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVerdict {
    pub regime: Regime,
    pub q_pi: f64,
    pub q_initial: f64,
    pub q_tuned: f64,
    /// `q_tuned < q_initial < q_pi`.
    pub ordering_ok: bool,
    /// `q_tuned <= 0.9 * q_pi`.
    pub separation_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub regulation_threshold: f64,
    pub q_ordering_ok: bool,
    pub regulation_ok: bool,
    pub q: Vec<QVerdict>,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn row(&self, controller: ControllerKind, regime: Regime) -> Option<&CompareRow> {
        self.rows
            .iter()
            .find(|r| r.controller == controller && r.regime == regime)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("controller,regime,seed,q_battery,iae_voltage,iae_pct,max_dev_pct,regulation_ok_fraction\n");
        for r in &self.rows {
            let m = &r.metrics;
            s.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.controller,
                r.regime,
                r.seed,
                m.q_battery,
                m.iae_voltage,
                m.iae_pct,
                m.max_dev_pct,
                m.regulation_ok_fraction
            ));
        }
        s
    }

    /// Plain-text table for the terminal.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<14} {:<9} {:>10} {:>9} {:>9} {:>8}\n",
            "controller", "regime", "Q [C]", "iae %", "maxdev %", "ok frac"
        );
        for r in &self.rows {
            let m = &r.metrics;
            s.push_str(&format!(
                "{:<14} {:<9} {:>10.3} {:>9.4} {:>9.3} {:>8.4}\n",
                r.controller.name(),
                r.regime.name(),
                m.q_battery,
                m.iae_pct,
                m.max_dev_pct,
                m.regulation_ok_fraction
            ));
        }
        for q in &self.q {
            s.push_str(&format!(
                "{}: Q tuned {:.3} < initial {:.3} < pi {:.3}: {}; tuned <= 0.9 pi: {}\n",
                q.regime,
                q.q_tuned,
                q.q_initial,
                q.q_pi,
                verdict(q.ordering_ok),
                verdict(q.separation_ok)
            ));
        }
        s.push_str(&format!(
            "Q ordering: {}\nregulation (>= {:.0}% of samples within 1%): {}\n",
            verdict(self.q_ordering_ok),
            self.regulation_threshold * 100.0,
            verdict(self.regulation_ok)
        ));
        s
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub const COMPARE_DIR: &str = "compare";

/// Runs the three controllers on the three regime scenarios with the
/// configured seed. Logs go to `<output_dir>/compare/<controller>_<regime>.csv`
/// next to `report.toml` and `report.csv`.
pub fn compare(cfg: &RunConfig, tuned_fis: Option<&Path>) -> Result<CompareReport> {
    let tuned_path = tuned_fis
        .map(Path::to_path_buf)
        .or_else(|| cfg.controller.fis_path.clone())
        .ok_or_else(|| CliError::MissingFis("no --fis given and controller.fis_path is not set".into()))?;
    let tuned = read_fis(&tuned_path)?;
    let initial = build_initial_fis();
    let dir = cfg.output_dir.join(COMPARE_DIR);

    let jobs: Vec<(ControllerKind, Regime)> = ControllerKind::ALL
        .iter()
        .flat_map(|&k| Regime::ALL.iter().map(move |&r| (k, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(kind, regime)| {
            let controller = ControllerConfig {
                kind,
                ..cfg.controller.clone()
            };
            let fis = match kind {
                ControllerKind::Pi => None,
                ControllerKind::FuzzyInitial => Some(&initial),
                ControllerKind::FuzzyTuned => Some(&tuned),
            };
            let scenario = cfg.scenario.build_for(regime);
            let log = run_one(cfg, &cfg.sim, &controller, fis, &scenario)?;
            let metrics = metrics(cfg, &log)?;
            write_log(&dir.join(format!("{kind}_{regime}.csv")), &log)?;
            Ok(CompareRow {
                controller: kind,
                regime,
                seed: scenario.seed(),
                regulation_ok: metrics.regulation_ok_fraction >= REGULATION_THRESHOLD,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let q_of = |k: ControllerKind, r: Regime| {
        rows.iter()
            .find(|x| x.controller == k && x.regime == r)
            .map(|x| x.metrics.q_battery)
            .expect("every pair ran")
    };
    let q: Vec<QVerdict> = Regime::ALL
        .iter()
        .map(|&regime| {
            let q_pi = q_of(ControllerKind::Pi, regime);
            let q_initial = q_of(ControllerKind::FuzzyInitial, regime);
            let q_tuned = q_of(ControllerKind::FuzzyTuned, regime);
            QVerdict {
                regime,
                q_pi,
                q_initial,
                q_tuned,
                ordering_ok: q_tuned < q_initial && q_initial < q_pi,
                separation_ok: q_tuned <= Q_SEPARATION * q_pi,
            }
        })
        .collect();
    let report = CompareReport {
        regulation_threshold: REGULATION_THRESHOLD,
        q_ordering_ok: q.iter().all(|v| v.ordering_ok && v.separation_ok),
        regulation_ok: rows.iter().all(|r| r.regulation_ok),
        q,
        rows,
    };
    write_text(&dir.join("report.toml"), &report.to_toml())?;
    write_text(&dir.join("report.csv"), &report.to_csv())?;
    Ok(report)
}
