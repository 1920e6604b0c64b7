//! Closed-loop simulation: plant, source tracker and stabilizer run together
//! over a scenario.
//!
//! The plant and every inner current loop advance at `dt`; the outer
//! stabilizer layer (voltage PI or fuzzy system) is sampled every
//! `control_period` and its references are held in between.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    inner_duties, pi_outer_references, source_power_tracking_duty, ControllerConfig, ControllerKind, ControllerState,
    CurrentRefs, FuzzyController,
};
use crate::fis::{FisDefinition, FisError};
use crate::plant::{self, load_resistance, Duties, ExogenousInputs, PlantError, PlantParams, PlantState};
use crate::scenario::{generate_profile, LogRow, RunLog, ScenarioSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Fis(#[from] FisError),
    #[error("invalid simulation settings: {0}")]
    Settings(String),
}

impl SimError {
    /// Simulated time of a numerical divergence, if that is what happened.
    pub fn divergence_time(&self) -> Option<f64> {
        match self {
            SimError::Plant(PlantError::Divergence { t, .. }) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// Integration step, seconds.
    pub dt: f64,
    /// Outer controller sample period; a multiple of `dt`.
    pub control_period: f64,
    /// Log sample period; a multiple of `dt`.
    pub log_period: f64,
    /// Start-up window excluded from deviation metrics.
    pub settling: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            control_period: 1e-3,
            log_period: 1e-3,
            settling: crate::scenario::DEFAULT_SETTLING,
        }
    }
}

fn ratio(period: f64, dt: f64, name: &str) -> Result<usize, SimError> {
    let r = period / dt;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-6 * n {
        return Err(SimError::Settings(format!(
            "dt = {dt} does not divide {name} = {period}"
        )));
    }
    Ok(n as usize)
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= plant::MAX_DT) {
            return Err(SimError::Settings(format!(
                "dt must lie in (0, {}], got {}",
                plant::MAX_DT,
                self.dt
            )));
        }
        ratio(self.control_period, self.dt, "control_period")?;
        ratio(self.log_period, self.dt, "log_period")?;
        if !(self.settling >= 0.0) {
            return Err(SimError::Settings("settling must be >= 0".into()));
        }
        Ok(())
    }
}

/// The outer layer in executable form.
#[derive(Debug, Clone)]
pub enum Stabilizer {
    Pi,
    Fuzzy(FuzzyController),
}

impl Stabilizer {
    /// Builds the outer layer for `kind`; fuzzy kinds need `fis`.
    pub fn new(kind: ControllerKind, fis: Option<&FisDefinition>) -> Result<Self, SimError> {
        match (kind, fis) {
            (ControllerKind::Pi, _) => Ok(Stabilizer::Pi),
            (_, Some(f)) => Ok(Stabilizer::Fuzzy(FuzzyController::new(f)?)),
            (_, None) => Err(SimError::Settings(format!("controller `{kind}` needs a fuzzy system"))),
        }
    }

    pub fn fuzzy(fis: &FisDefinition) -> Result<Self, SimError> {
        Ok(Stabilizer::Fuzzy(FuzzyController::new(fis)?))
    }
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct ClosedLoop<'a> {
    pub plant: &'a PlantParams,
    pub controller: &'a ControllerConfig,
    pub stabilizer: &'a Stabilizer,
    pub settings: &'a SimSettings,
}

impl ClosedLoop<'_> {
    /// Runs the scenario, handing each logged sample to `observer`, and
    /// returns the final plant state.
    pub fn run_with(&self, scenario: &ScenarioSpec, mut observer: impl FnMut(&LogRow)) -> Result<PlantState, SimError> {
        let s = self.settings;
        s.validate()?;
        self.plant.validate()?;
        self.controller.validate().map_err(SimError::Settings)?;
        scenario.validate().map_err(|e| SimError::Settings(e.to_string()))?;

        let p = self.plant;
        let dt = s.dt;
        let control_every = ratio(s.control_period, dt, "control_period")?;
        let log_every = ratio(s.log_period, dt, "log_period")?;
        let n_steps = (scenario.duration / dt).round() as usize;
        let source = generate_profile(&scenario.source);
        let load = generate_profile(&scenario.load);

        let mut state = PlantState::at_rest(p, scenario.soc_b, scenario.soc_u);
        let mut ctl = ControllerState::default();
        let mut tracker = Default::default();
        let mut refs = CurrentRefs::default();

        for k in 0..=n_steps {
            let t = k as f64 * dt;
            state.t = t;
            let exo = ExogenousInputs {
                p_source_target: source.at(t),
                p_load_target: load.at(t),
            };
            if k % control_every == 0 {
                let period = control_every as f64 * dt;
                refs = match self.stabilizer {
                    Stabilizer::Pi => pi_outer_references(&state, &self.controller.pi, p, &mut ctl, period),
                    Stabilizer::Fuzzy(fc) => fc.references(&state, &self.controller.scales, p, &mut ctl, period)?,
                };
            }
            let mut duties = inner_duties(&state, &refs, &self.controller.inner, p, &mut ctl.inner, dt);
            let (d_source, next_tracker) = source_power_tracking_duty(tracker, &state, exo.p_source_target, p, dt);
            tracker = next_tracker;
            duties.source = d_source;

            if k % log_every == 0 {
                observer(&log_row(&state, &duties, &refs, &exo, p));
            }
            if k == n_steps {
                break;
            }
            state = plant::step(&state, &duties, &exo, p, dt)?;
        }
        state.t = n_steps as f64 * dt;
        Ok(state)
    }

    pub fn run(&self, scenario: &ScenarioSpec) -> Result<RunLog, SimError> {
        let mut log = RunLog::new(self.settings.log_period);
        log.rows
            .reserve((scenario.duration / self.settings.log_period).round() as usize + 1);
        self.run_with(scenario, |row| log.rows.push(*row))?;
        Ok(log)
    }
}

fn log_row(state: &PlantState, d: &Duties, refs: &CurrentRefs, exo: &ExogenousInputs, p: &PlantParams) -> LogRow {
    let v = state.v_bus;
    LogRow {
        t: state.t,
        v_bus: v,
        i_batt: state.i_l.battery,
        i_uc: state.i_l.ultracap,
        i_ovd: state.i_l.ovd,
        p_source: state.source_power(p),
        p_load: v * v / load_resistance(exo.p_load_target, v, p),
        soc_b: state.soc_b(p),
        soc_u: state.soc_u(p),
        d_b: d.battery,
        d_u: d.ultracap,
        d_o: d.ovd,
        ref_b: refs.battery,
        ref_u: refs.ultracap,
        ref_o: refs.ovd,
    }
}
