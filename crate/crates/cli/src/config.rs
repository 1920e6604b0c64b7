//! Run configuration file.
//!
//! Every section and field is optional; anything left out takes its
//! default. `dcmg simulate` with an empty file runs the balanced scenario
//! under the initial fuzzy controller.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dcmg_core::control::ControllerConfig;
use dcmg_core::plant::PlantParams;
use dcmg_core::scenario::{
    load_seed, make_scenario, ProfileSpec, Regime, ScenarioSpec, DEFAULT_DURATION, DEFAULT_SOC_B, DEFAULT_SOC_U,
    LOAD_HOLD, SOURCE_HOLD,
};
use dcmg_core::sim::SimSettings;
use dcmg_core::tuner::{CostSpec, SwarmConfig};

/// Scenario section: a regime plus optional overrides of its profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub regime: Regime,
    pub seed: u64,
    pub duration: f64,
    pub soc_b: f64,
    pub soc_u: f64,
    pub source_hold: f64,
    pub load_hold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_range: Option<[f64; 2]>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            regime: Regime::Balanced,
            seed: 1,
            duration: DEFAULT_DURATION,
            soc_b: DEFAULT_SOC_B,
            soc_u: DEFAULT_SOC_U,
            source_hold: SOURCE_HOLD,
            load_hold: LOAD_HOLD,
            source_range: None,
            load_range: None,
        }
    }
}

impl ScenarioConfig {
    /// Scenario for `regime` with every other setting taken from `self`.
    /// Range overrides only apply to the configured regime.
    pub fn build_for(&self, regime: Regime) -> ScenarioSpec {
        let base = make_scenario(regime, self.seed);
        let own = regime == self.regime;
        let profile = |range: [f64; 2], over: Option<[f64; 2]>, hold: f64, seed: u64| ProfileSpec {
            hold_time: hold,
            power_range: over.filter(|_| own).unwrap_or(range),
            seed,
            duration: self.duration,
        };
        ScenarioSpec {
            regime,
            source: profile(base.source.power_range, self.source_range, self.source_hold, self.seed),
            load: profile(
                base.load.power_range,
                self.load_range,
                self.load_hold,
                load_seed(self.seed),
            ),
            soc_b: self.soc_b,
            soc_u: self.soc_u,
            duration: self.duration,
        }
    }

    pub fn build(&self) -> ScenarioSpec {
        self.build_for(self.regime)
    }
}

/// Tuner section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub swarm: SwarmConfig,
    pub cost: CostSpec,
    pub sigma_bounds: [f64; 2],
    /// Integration step used while tuning; the run's `sim.dt` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            cost: CostSpec::default(),
            sigma_bounds: [0.02, 1.0],
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub scenario: ScenarioConfig,
    pub sim: SimSettings,
    pub tuner: TunerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            plant: PlantParams::default(),
            controller: ControllerConfig::default(),
            scenario: ScenarioConfig::default(),
            sim: SimSettings::default(),
            tuner: TunerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads a config file. Relative paths inside it (output directory, FIS
    /// file) are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output_dir = base.join(&cfg.output_dir);
        if let Some(p) = &cfg.controller.fis_path {
            cfg.controller.fis_path = Some(base.join(p));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate().map_err(anyhow::Error::msg)?;
        self.scenario.build().validate()?;
        self.sim.validate()?;
        self.tuner.swarm.validate()?;
        self.tuner.cost.validate().map_err(anyhow::Error::msg)?;
        let [lo, hi] = self.tuner.sigma_bounds;
        if !(lo > 0.0 && lo < hi) {
            bail!("tuner.sigma_bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]");
        }
        if let Some(dt) = self.tuner.dt {
            self.tuning_settings_with(dt).validate()?;
        }
        Ok(())
    }

    /// Simulation settings used by the tuner.
    pub fn tuning_settings(&self) -> SimSettings {
        self.tuner.dt.map_or(self.sim, |dt| self.tuning_settings_with(dt))
    }

    fn tuning_settings_with(&self, dt: f64) -> SimSettings {
        SimSettings { dt, ..self.sim }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[sim]\nstep = 1e-4\n").is_err());
    }

    #[test]
    fn dt_must_divide_log_period() {
        let cfg = RunConfig::from_toml("[sim]\ndt = 3e-4\n").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("does not divide"), "{err}");
    }

    #[test]
    fn scenario_matches_standard_regimes() {
        let sc = ScenarioConfig::default();
        for regime in Regime::ALL {
            assert_eq!(sc.build_for(regime), make_scenario(regime, 1));
        }
    }

    #[test]
    fn range_override_only_touches_own_regime() {
        let sc = ScenarioConfig {
            source_range: Some([200.0, 200.0]),
            ..Default::default()
        };
        assert_eq!(sc.build().source.power_range, [200.0, 200.0]);
        assert_eq!(sc.build_for(Regime::Surplus), make_scenario(Regime::Surplus, 1));
    }
}
