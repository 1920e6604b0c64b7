//! Seeded source/load profiles, the three production regimes, run logs and
//! the metrics computed from them.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("run log is empty")]
    EmptyLog,
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A piecewise-constant random power profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    /// Seconds each drawn value is held.
    pub hold_time: f64,
    /// Watts, `[lo, hi]`.
    pub power_range: [f64; 2],
    pub seed: u64,
    pub duration: f64,
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let [lo, hi] = self.power_range;
        if !(self.hold_time > 0.0 && self.hold_time.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "hold_time must be positive, got {}",
                self.hold_time
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "power range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        // tolerate durations that are an exact multiple up to rounding
        let n = self.duration / self.hold_time;
        let rounded = n.round();
        if (n - rounded).abs() < 1e-9 * n.max(1.0) {
            rounded as usize
        } else {
            n.ceil() as usize
        }
        .max(1)
    }
}

/// Uniform draw in `[0, 1)` for segment `k` of stream `seed`.
///
/// The generator is ChaCha8 keyed by `seed` with the segment index as its
/// stream number; the first 64-bit word is mapped to a double through its
/// top 53 bits. A segment's value depends only on `(seed, k)`.
pub fn segment_uniform(seed: u64, k: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub hold_time: f64,
    pub values: Vec<f64>,
}

impl Profile {
    /// Value in force at time `t`; the last segment extends past the end.
    pub fn at(&self, t: f64) -> f64 {
        let k = (t / self.hold_time).floor().max(0.0) as usize;
        self.values[k.min(self.values.len() - 1)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub fn generate_profile(spec: &ProfileSpec) -> Profile {
    let [lo, hi] = spec.power_range;
    let values = (0..spec.segment_count() as u64)
        .map(|k| lo + (hi - lo) * segment_uniform(spec.seed, k))
        .collect();
    Profile {
        hold_time: spec.hold_time,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Surplus,
    Deficit,
    Balanced,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Surplus, Regime::Deficit, Regime::Balanced];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Surplus => "surplus",
            Regime::Deficit => "deficit",
            Regime::Balanced => "balanced",
        }
    }

    /// Source and load power ranges in watts.
    pub fn power_ranges(self) -> ([f64; 2], [f64; 2]) {
        match self {
            Regime::Surplus => ([300.0, 500.0], [100.0, 250.0]),
            Regime::Deficit => ([100.0, 250.0], [300.0, 500.0]),
            Regime::Balanced => ([150.0, 350.0], [150.0, 350.0]),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown regime `{s}` (expected surplus, deficit or balanced)"))
    }
}

pub const DEFAULT_DURATION: f64 = 150.0;
pub const SOURCE_HOLD: f64 = 10.0;
pub const LOAD_HOLD: f64 = 3.0;
pub const DEFAULT_SOC_B: f64 = 0.5;
pub const DEFAULT_SOC_U: f64 = 0.6;

/// Seed of the load stream derived from the scenario seed.
pub fn load_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub regime: Regime,
    pub source: ProfileSpec,
    pub load: ProfileSpec,
    pub soc_b: f64,
    pub soc_u: f64,
    pub duration: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.source.validate()?;
        self.load.validate()?;
        if self.source.duration != self.duration || self.load.duration != self.duration {
            return Err(ScenarioError::Invalid(
                "profiles must share the scenario duration".into(),
            ));
        }
        for (name, soc) in [("soc_b", self.soc_b), ("soc_u", self.soc_u)] {
            if !(0.0..=1.0).contains(&soc) {
                return Err(ScenarioError::Invalid(format!("{name} must lie in [0, 1], got {soc}")));
            }
        }
        Ok(())
    }

    /// Same scenario under a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.source.seed = seed;
        s.load.seed = load_seed(seed);
        s
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        let mut s = self.clone();
        s.duration = duration;
        s.source.duration = duration;
        s.load.duration = duration;
        s
    }

    pub fn seed(&self) -> u64 {
        self.source.seed
    }
}

/// Standard scenario of a regime: source redrawn every 10 s, load every
/// 3 s, 150 s long.
pub fn make_scenario(regime: Regime, seed: u64) -> ScenarioSpec {
    let (source, load) = regime.power_ranges();
    ScenarioSpec {
        regime,
        source: ProfileSpec {
            hold_time: SOURCE_HOLD,
            power_range: source,
            seed,
            duration: DEFAULT_DURATION,
        },
        load: ProfileSpec {
            hold_time: LOAD_HOLD,
            power_range: load,
            seed: load_seed(seed),
            duration: DEFAULT_DURATION,
        },
        soc_b: DEFAULT_SOC_B,
        soc_u: DEFAULT_SOC_U,
        duration: DEFAULT_DURATION,
    }
}

/// One logged sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub v_bus: f64,
    pub i_batt: f64,
    pub i_uc: f64,
    pub i_ovd: f64,
    pub p_source: f64,
    pub p_load: f64,
    pub soc_b: f64,
    pub soc_u: f64,
    pub d_b: f64,
    pub d_u: f64,
    pub d_o: f64,
    pub ref_b: f64,
    pub ref_u: f64,
    pub ref_o: f64,
}

pub const LOG_HEADER: &str = "t,v_bus,i_batt,i_uc,i_ovd,p_source,p_load,soc_b,soc_u,d_b,d_u,d_o,ref_b,ref_u,ref_o";

impl LogRow {
    fn fields(&self) -> [f64; 15] {
        [
            self.t,
            self.v_bus,
            self.i_batt,
            self.i_uc,
            self.i_ovd,
            self.p_source,
            self.p_load,
            self.soc_b,
            self.soc_u,
            self.d_b,
            self.d_u,
            self.d_o,
            self.ref_b,
            self.ref_u,
            self.ref_o,
        ]
    }
}

/// Uniformly sampled simulation record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub sample_period: f64,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn new(sample_period: f64) -> Self {
        Self {
            sample_period,
            rows: Vec::new(),
        }
    }

    /// Builds a log from a function of time sampled at `k * period`.
    pub fn from_fn(period: f64, duration: f64, f: impl Fn(f64) -> LogRow) -> Self {
        let n = (duration / period).round() as usize;
        let rows = (0..=n)
            .map(|k| {
                let t = k as f64 * period;
                LogRow { t, ..f(t) }
            })
            .collect();
        Self {
            sample_period: period,
            rows,
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{LOG_HEADER}")?;
        let mut line = String::with_capacity(256);
        for row in &self.rows {
            line.clear();
            for (i, v) in row.fields().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                // fixed precision keeps files diff-able and byte-stable
                use std::fmt::Write as _;
                write!(line, "{v:.6}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Trapezoidal integral of `f(row)` over time.
    pub fn integrate(&self, f: impl Fn(&LogRow) -> f64) -> f64 {
        self.rows
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
            .sum()
    }
}

/// Battery throughput `Q = integral of |i_batt| dt`.
pub fn battery_throughput(log: &RunLog) -> Result<f64, ScenarioError> {
    if log.rows.is_empty() {
        return Err(ScenarioError::EmptyLog);
    }
    Ok(log.integrate(|r| r.i_batt.abs()))
}

pub const DEFAULT_SETTLING: f64 = 1.0;
/// Band counted as regulated, percent of nominal.
pub const REGULATION_BAND_PCT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageMetrics {
    /// Volt-seconds.
    pub iae_voltage: f64,
    pub iae_pct: f64,
    pub max_dev_pct: f64,
    pub regulation_ok_fraction: f64,
}

/// Regulation metrics; `settling` seconds at the start are excluded from the
/// maximum deviation and the in-band fraction.
pub fn voltage_metrics(log: &RunLog, v_nominal: f64, settling: f64) -> Result<VoltageMetrics, ScenarioError> {
    let first = log.rows.first().ok_or(ScenarioError::EmptyLog)?;
    let iae_voltage = log.integrate(|r| (v_nominal - r.v_bus).abs());
    let duration = log.duration();
    let iae_pct = if duration > 0.0 {
        iae_voltage / (v_nominal * duration) * 100.0
    } else {
        0.0
    };
    let band = REGULATION_BAND_PCT / 100.0 * v_nominal;
    let settled: Vec<&LogRow> = log.rows.iter().filter(|r| r.t - first.t >= settling).collect();
    let max_dev = settled.iter().map(|r| (r.v_bus - v_nominal).abs()).fold(0.0, f64::max);
    let regulation_ok_fraction = if settled.is_empty() {
        1.0
    } else {
        settled.iter().filter(|r| (r.v_bus - v_nominal).abs() < band).count() as f64 / settled.len() as f64
    };
    Ok(VoltageMetrics {
        iae_voltage,
        iae_pct,
        max_dev_pct: max_dev / v_nominal * 100.0,
        regulation_ok_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Coulombs.
    pub q_battery: f64,
    pub iae_voltage: f64,
    pub iae_pct: f64,
    pub max_dev_pct: f64,
    pub regulation_ok_fraction: f64,
}

impl MetricsReport {
    pub fn from_log(log: &RunLog, v_nominal: f64, settling: f64) -> Result<Self, ScenarioError> {
        let v = voltage_metrics(log, v_nominal, settling)?;
        Ok(Self {
            q_battery: battery_throughput(log)?,
            iae_voltage: v.iae_voltage,
            iae_pct: v.iae_pct,
            max_dev_pct: v.max_dev_pct,
            regulation_ok_fraction: v.regulation_ok_fraction,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metrics serialize")
    }
}
