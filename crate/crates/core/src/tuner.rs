//! Particle swarm tuning of the fuzzy controller's output membership
//! functions.
//!
//! A candidate is the flat vector of `(center, sigma)` pairs of every output
//! MF, outputs and MFs taken in definition order. Its cost comes from one
//! closed-loop run: `integral (v_bus - v_nominal)^2 dt + w * integral |i_batt|^p dt`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControllerConfig;
use crate::fis::{FisDefinition, FisError};
use crate::plant::PlantParams;
use crate::scenario::{LogRow, RunLog, ScenarioSpec};
use crate::sim::{ClosedLoop, SimSettings, Stabilizer};

/// Cost assigned to a candidate whose simulation fails.
pub const DIVERGENCE_PENALTY: f64 = 1e9;

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("parameter vector has length {got}, template needs {expected}")]
    Length { expected: usize, got: usize },
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("invalid swarm configuration: {0}")]
    Swarm(String),
    #[error(transparent)]
    Fis(#[from] FisError),
}

/// Output MF parameters of `fis` as `[c0, s0, c1, s1, ...]`.
pub fn encode_fis(fis: &FisDefinition) -> Vec<f64> {
    fis.outputs
        .iter()
        .flat_map(|v| v.mfs.iter().flat_map(|m| [m.center, m.sigma]))
        .collect()
}

/// Copy of `template` with its output MF centers and sigmas replaced by
/// `params`. Inputs and rules are untouched.
pub fn decode_fis(template: &FisDefinition, params: &[f64]) -> Result<FisDefinition, TuneError> {
    let expected = 2 * template.outputs.iter().map(|v| v.mfs.len()).sum::<usize>();
    if params.len() != expected {
        return Err(TuneError::Length {
            expected,
            got: params.len(),
        });
    }
    let mut fis = template.clone();
    let mut it = params.chunks_exact(2);
    for mf in fis.outputs.iter_mut().flat_map(|v| v.mfs.iter_mut()) {
        let pair = it.next().expect("length checked above");
        mf.center = pair[0];
        mf.sigma = pair[1];
    }
    fis.validate()?;
    Ok(fis)
}

/// Names of the parameter vector entries, e.g. `i_b.VN.center`.
pub fn param_names(fis: &FisDefinition) -> Vec<String> {
    fis.outputs
        .iter()
        .flat_map(|v| {
            v.mfs.iter().flat_map(move |m| {
                [
                    format!("{}.{}.center", v.name, m.label),
                    format!("{}.{}.sigma", v.name, m.label),
                ]
            })
        })
        .collect()
}

/// Per-dimension search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, TuneError> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    /// The same interval on every one of `dim` axes.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self, TuneError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Centers range over their output's universe, sigmas over `sigma`.
    pub fn for_fis(fis: &FisDefinition, sigma: [f64; 2]) -> Result<Self, TuneError> {
        if !(sigma[0] > 0.0) {
            return Err(TuneError::Bounds(format!(
                "sigma lower bound must be > 0, got {}",
                sigma[0]
            )));
        }
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for v in &fis.outputs {
            for _ in &v.mfs {
                lo.extend([v.lo(), sigma[0]]);
                hi.extend([v.hi(), sigma[1]]);
            }
        }
        Self::new(lo, hi)
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(TuneError::Bounds(format!(
                "need matching non-empty bound vectors, got {} and {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(TuneError::Bounds(format!(
                    "dimension {i}: need lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub population: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit per dimension as a fraction of that dimension's range.
    pub velocity_cap: f64,
    pub seed: u64,
    /// Evaluate particles on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            population: 60,
            iterations: 100,
            inertia: 0.7298,
            cognitive: 1.4962,
            social: 1.4962,
            velocity_cap: 0.5,
            seed: 1,
            parallel: true,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        if self.population < 1 {
            return Err(TuneError::Swarm("population must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(TuneError::Swarm("iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TuneError::Swarm(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        if !(self.velocity_cap > 0.0 && self.velocity_cap.is_finite()) {
            return Err(TuneError::Swarm(format!(
                "velocity_cap must be positive, got {}",
                self.velocity_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    /// Best cost after each iteration; non-increasing.
    pub history: Vec<f64>,
    /// Global best position after each iteration.
    pub trajectory: Vec<Vec<f64>>,
    pub evaluations: usize,
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn evaluate<F>(objective: &F, xs: &[Vec<f64>], parallel: bool) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let cost = |x: &Vec<f64>| {
        let c = objective(x);
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    };
    if parallel {
        xs.par_iter().map(cost).collect()
    } else {
        xs.iter().map(cost).collect()
    }
}

/// Global-best particle swarm minimization of `objective` over `bounds`.
///
/// Particles start at rest. When `seed_position` is given, particle 0 starts
/// there (clamped into the box) and the others are uniform in the box. All
/// random draws come from one ChaCha8 stream and happen before each round of
/// evaluations, so parallel evaluation gives bit-identical results.
pub fn pso_optimize<F>(
    objective: F,
    bounds: &Bounds,
    cfg: &SwarmConfig,
    seed_position: Option<&[f64]>,
) -> Result<TuneResult, TuneError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pso_optimize_observed(objective, bounds, cfg, seed_position, |_, _| {})
}

/// [`pso_optimize`] that reports `(iteration, best_cost)` after every
/// iteration, counting from 1.
pub fn pso_optimize_observed<F>(
    objective: F,
    bounds: &Bounds,
    cfg: &SwarmConfig,
    seed_position: Option<&[f64]>,
    mut on_iteration: impl FnMut(usize, f64),
) -> Result<TuneResult, TuneError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    bounds.validate()?;
    cfg.validate()?;
    let dim = bounds.dim();
    if let Some(s) = seed_position {
        if s.len() != dim {
            return Err(TuneError::Length {
                expected: dim,
                got: s.len(),
            });
        }
    }
    let mut rng = Rng(ChaCha8Rng::seed_from_u64(cfg.seed));
    let vmax: Vec<f64> = (0..dim)
        .map(|j| cfg.velocity_cap * (bounds.hi[j] - bounds.lo[j]))
        .collect();

    let mut x: Vec<Vec<f64>> = (0..cfg.population)
        .map(|i| match (i, seed_position) {
            (0, Some(s)) => {
                let mut p = s.to_vec();
                bounds.clamp(&mut p);
                p
            }
            _ => (0..dim)
                .map(|j| bounds.lo[j] + (bounds.hi[j] - bounds.lo[j]) * rng.uniform())
                .collect(),
        })
        .collect();
    let mut v = vec![vec![0.0; dim]; cfg.population];

    let mut cost = evaluate(&objective, &x, cfg.parallel);
    let mut evaluations = cfg.population;
    let mut pbest = x.clone();
    let mut pbest_cost = cost.clone();
    let mut g = argmin(&pbest_cost);
    let mut gbest = pbest[g].clone();
    let mut gbest_cost = pbest_cost[g];

    let mut history = Vec::with_capacity(cfg.iterations);
    let mut trajectory = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        for i in 0..cfg.population {
            for j in 0..dim {
                let (r1, r2) = (rng.uniform(), rng.uniform());
                let vel = cfg.inertia * v[i][j]
                    + cfg.cognitive * r1 * (pbest[i][j] - x[i][j])
                    + cfg.social * r2 * (gbest[j] - x[i][j]);
                v[i][j] = vel.clamp(-vmax[j], vmax[j]);
                x[i][j] += v[i][j];
            }
            bounds.clamp(&mut x[i]);
            debug_assert!(bounds.contains(&x[i]));
        }
        cost = evaluate(&objective, &x, cfg.parallel);
        evaluations += cfg.population;
        for i in 0..cfg.population {
            if cost[i] < pbest_cost[i] {
                pbest_cost[i] = cost[i];
                pbest[i].clone_from(&x[i]);
            }
        }
        g = argmin(&pbest_cost);
        if pbest_cost[g] < gbest_cost {
            gbest_cost = pbest_cost[g];
            gbest.clone_from(&pbest[g]);
        }
        history.push(gbest_cost);
        trajectory.push(gbest.clone());
        on_iteration(iteration, gbest_cost);
    }
    Ok(TuneResult {
        best_params: gbest,
        best_cost: gbest_cost,
        history,
        trajectory,
        evaluations,
    })
}

/// First index of the smallest value.
fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in xs.iter().enumerate() {
        if c < xs[best] {
            best = i;
        }
    }
    best
}

/// Weights of the tuning cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSpec {
    pub battery_weight: f64,
    /// 2 integrates `i_batt^2`, 1 integrates `|i_batt|`.
    pub battery_exponent: u8,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            battery_weight: 0.1,
            battery_exponent: 2,
        }
    }
}

impl CostSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !matches!(self.battery_exponent, 1 | 2) {
            return Err(format!(
                "battery_exponent must be 1 or 2, got {}",
                self.battery_exponent
            ));
        }
        if !(self.battery_weight >= 0.0 && self.battery_weight.is_finite()) {
            return Err(format!("battery_weight must be >= 0, got {}", self.battery_weight));
        }
        Ok(())
    }

    fn integrand(&self, row: &LogRow, v_nominal: f64) -> f64 {
        let dv = row.v_bus - v_nominal;
        let ib = match self.battery_exponent {
            1 => row.i_batt.abs(),
            _ => row.i_batt * row.i_batt,
        };
        dv * dv + self.battery_weight * ib
    }
}

/// Streaming trapezoidal integral of the cost over log samples.
#[derive(Debug, Clone)]
pub struct CostAccumulator {
    spec: CostSpec,
    v_nominal: f64,
    last: Option<(f64, f64)>,
    total: f64,
}

impl CostAccumulator {
    pub fn new(spec: CostSpec, v_nominal: f64) -> Self {
        Self {
            spec,
            v_nominal,
            last: None,
            total: 0.0,
        }
    }

    pub fn push(&mut self, row: &LogRow) {
        let f = self.spec.integrand(row, self.v_nominal);
        if let Some((t0, f0)) = self.last {
            self.total += 0.5 * (row.t - t0) * (f0 + f);
        }
        self.last = Some((row.t, f));
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Cost of an already recorded run.
pub fn objective_from_log(log: &RunLog, v_nominal: f64, spec: &CostSpec) -> f64 {
    let mut acc = CostAccumulator::new(*spec, v_nominal);
    log.rows.iter().for_each(|r| acc.push(r));
    acc.total()
}

/// A tuning problem: the closed loop a candidate FIS is scored in.
#[derive(Debug, Clone)]
pub struct TuningProblem<'a> {
    pub template: &'a FisDefinition,
    pub plant: &'a PlantParams,
    pub controller: &'a ControllerConfig,
    pub settings: &'a SimSettings,
    pub scenario: &'a ScenarioSpec,
    pub cost: CostSpec,
}

impl TuningProblem<'_> {
    /// Cost of a candidate; decoding failures and diverged runs get
    /// [`DIVERGENCE_PENALTY`].
    pub fn objective(&self, params: &[f64]) -> f64 {
        let Ok(fis) = decode_fis(self.template, params) else {
            return DIVERGENCE_PENALTY;
        };
        self.cost_of(&fis).unwrap_or(DIVERGENCE_PENALTY)
    }

    /// Cost of a complete FIS, or `None` if the run fails.
    pub fn cost_of(&self, fis: &FisDefinition) -> Option<f64> {
        let stabilizer = Stabilizer::fuzzy(fis).ok()?;
        let closed = ClosedLoop {
            plant: self.plant,
            controller: self.controller,
            stabilizer: &stabilizer,
            settings: self.settings,
        };
        let mut acc = CostAccumulator::new(self.cost, self.plant.v_nominal);
        closed.run_with(self.scenario, |row| acc.push(row)).ok()?;
        let c = acc.total();
        c.is_finite().then_some(c)
    }

    /// Runs the swarm with particle 0 seeded at the template's parameters.
    pub fn optimize(
        &self,
        bounds: &Bounds,
        swarm: &SwarmConfig,
        on_iteration: impl FnMut(usize, f64),
    ) -> Result<TuneResult, TuneError> {
        let start = encode_fis(self.template);
        pso_optimize_observed(|x| self.objective(x), bounds, swarm, Some(&start), on_iteration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::build_initial_fis;

    fn row(v_bus: f64, i_batt: f64) -> LogRow {
        LogRow {
            v_bus,
            i_batt,
            ..Default::default()
        }
    }

    #[test]
    fn cost_of_synthetic_logs() {
        let spec = CostSpec::default();
        let log = RunLog::from_fn(1e-3, 10.0, |_| row(100.0, 0.0));
        assert_eq!(objective_from_log(&log, 100.0, &spec), 0.0);
        let log = RunLog::from_fn(1e-3, 10.0, |_| row(101.0, 0.0));
        assert!((objective_from_log(&log, 100.0, &spec) - 10.0).abs() < 1e-9);
        let log = RunLog::from_fn(1e-3, 5.0, |_| row(100.0, 2.0));
        assert!((objective_from_log(&log, 100.0, &spec) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn absolute_battery_variant() {
        let spec = CostSpec {
            battery_exponent: 1,
            ..Default::default()
        };
        let log = RunLog::from_fn(1e-3, 5.0, |_| row(100.0, -2.0));
        assert!((objective_from_log(&log, 100.0, &spec) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encode_decode_round_trip() {
        let fis = build_initial_fis();
        let p = encode_fis(&fis);
        assert_eq!(p.len(), 24);
        let back = decode_fis(&fis, &p).unwrap();
        assert_eq!(back.to_toml().unwrap(), fis.to_toml().unwrap());
        assert_eq!(param_names(&fis).len(), 24);
        assert_eq!(param_names(&fis)[4], "i_b.Z.center");
    }

    #[test]
    fn decode_is_local() {
        let fis = build_initial_fis();
        let mut p = encode_fis(&fis);
        p[4] = 0.1;
        let out = decode_fis(&fis, &p).unwrap();
        for (a, b) in fis.outputs.iter().zip(&out.outputs) {
            for (ma, mb) in a.mfs.iter().zip(&b.mfs) {
                let touched = a.name == "i_b" && ma.label == "Z";
                assert_eq!(ma == mb, !touched, "{}.{}", a.name, ma.label);
            }
        }
        assert_eq!(out.inputs, fis.inputs);
        assert_eq!(out.rules, fis.rules);
    }

    #[test]
    fn decode_rejects_wrong_length() {
        let fis = build_initial_fis();
        assert!(matches!(
            decode_fis(&fis, &[0.0; 23]),
            Err(TuneError::Length { expected: 24, got: 23 })
        ));
    }

    #[test]
    fn sigma_at_lower_bound_decodes() {
        let fis = build_initial_fis();
        let b = Bounds::for_fis(&fis, [0.02, 1.0]).unwrap();
        let mut p = encode_fis(&fis);
        for j in (1..p.len()).step_by(2) {
            p[j] = b.lo[j];
        }
        assert!(b.contains(&p));
        decode_fis(&fis, &p).unwrap();
    }

    #[test]
    fn lone_particle_at_rest_stays_put() {
        let b = Bounds::uniform(3, -5.0, 5.0).unwrap();
        let cfg = SwarmConfig {
            population: 1,
            iterations: 20,
            ..Default::default()
        };
        let start = [1.0, -2.0, 3.0];
        let r = pso_optimize(|x| x.iter().map(|v| v * v).sum(), &b, &cfg, Some(&start)).unwrap();
        assert_eq!(r.best_params, start);
        assert!(r.trajectory.iter().all(|p| p == &start));
    }

    #[test]
    fn sphere_converges_and_history_is_monotone() {
        let b = Bounds::uniform(5, -5.0, 5.0).unwrap();
        for seed in 1..=3 {
            let cfg = SwarmConfig {
                seed,
                ..Default::default()
            };
            let r = pso_optimize(|x| x.iter().map(|v| v * v).sum(), &b, &cfg, None).unwrap();
            assert!(r.best_cost < 1e-3, "seed {seed}: {}", r.best_cost);
            assert_eq!(r.history.len(), 100);
            assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(r.evaluations, 60 * 101);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let b = Bounds::uniform(4, -3.0, 3.0).unwrap();
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (v - i as f64 * 0.3).powi(2))
                .sum::<f64>()
        };
        let seq = SwarmConfig {
            population: 12,
            iterations: 15,
            parallel: false,
            ..Default::default()
        };
        let par = SwarmConfig { parallel: true, ..seq };
        assert_eq!(
            pso_optimize(f, &b, &seq, None).unwrap(),
            pso_optimize(f, &b, &par, None).unwrap()
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(Bounds::uniform(2, 1.0, 1.0).is_err());
        assert!(Bounds::for_fis(&build_initial_fis(), [0.0, 1.0]).is_err());
        let b = Bounds::uniform(2, -1.0, 1.0).unwrap();
        let cfg = SwarmConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(pso_optimize(|_| 0.0, &b, &cfg, None).is_err());
    }
}
