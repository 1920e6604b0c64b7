use std::time::Instant;

use dcmg_core::control::{build_initial_fis, ControllerConfig};
use dcmg_core::plant::PlantParams;
use dcmg_core::scenario::{make_scenario, Regime};
use dcmg_core::sim::SimSettings;
use dcmg_core::tuner::*;

fn swarm(seed: u64) -> SwarmConfig {
    SwarmConfig {
        seed,
        ..Default::default()
    }
}

#[test]
fn sphere_reaches_the_optimum() {
    let target = [0.3, -1.2, 2.0, 0.0, -0.7];
    let sphere = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let bounds = Bounds::uniform(5, -5.0, 5.0).unwrap();
    for seed in [1, 2, 3] {
        let start = Instant::now();
        let r = pso_optimize(sphere, &bounds, &swarm(seed), None).unwrap();
        let took = start.elapsed().as_secs_f64();
        assert!(r.best_cost < 1e-3, "seed {seed}: best {}", r.best_cost);
        assert!(took < 5.0, "seed {seed}: {took:.2} s");
        assert_eq!(r.history.len(), 100);
        assert_eq!(r.evaluations, 60 * 101);
        assert!(bounds.contains(&r.best_params));
    }
}

#[test]
fn swarm_is_reproducible() {
    let f = |x: &[f64]| x.iter().map(|v| v * v - (3.0 * v).cos()).sum::<f64>();
    let bounds = Bounds::uniform(4, -3.0, 3.0).unwrap();
    let a = pso_optimize(f, &bounds, &swarm(7), None).unwrap();
    let b = pso_optimize(f, &bounds, &swarm(7), None).unwrap();
    assert_eq!(a, b);
    let c = pso_optimize(f, &bounds, &swarm(8), None).unwrap();
    assert_ne!(a.trajectory, c.trajectory);
}

#[test]
fn seeded_particle_is_never_lost() {
    // a deceptive landscape whose global minimum sits at the seed position
    let seed_at = [0.9, 0.9];
    let f = |x: &[f64]| {
        let d = ((x[0] - 0.9).powi(2) + (x[1] - 0.9).powi(2)).sqrt();
        if d < 1e-9 {
            -1.0
        } else {
            d.min(0.5)
        }
    };
    let bounds = Bounds::uniform(2, -1.0, 1.0).unwrap();
    let cfg = SwarmConfig {
        population: 10,
        iterations: 20,
        ..Default::default()
    };
    let r = pso_optimize(f, &bounds, &cfg, Some(&seed_at)).unwrap();
    assert_eq!(r.best_cost, -1.0);
    assert_eq!(r.history[0], -1.0);
}

fn short_problem_run(seed: u64) -> (f64, TuneResult, f64) {
    let template = build_initial_fis();
    let plant = PlantParams::default();
    let controller = ControllerConfig::default();
    let settings = SimSettings::default();
    let scenario = make_scenario(Regime::Balanced, 1).with_duration(4.0);
    let problem = TuningProblem {
        template: &template,
        plant: &plant,
        controller: &controller,
        settings: &settings,
        scenario: &scenario,
        cost: CostSpec::default(),
    };
    let initial = problem.cost_of(&template).unwrap();
    let bounds = Bounds::for_fis(&template, [0.02, 1.0]).unwrap();
    let cfg = SwarmConfig {
        population: 6,
        iterations: 4,
        seed,
        ..Default::default()
    };
    let r = problem.optimize(&bounds, &cfg, |_, _| {}).unwrap();
    let again = problem
        .cost_of(&decode_fis(&template, &r.best_params).unwrap())
        .unwrap();
    (initial, r, again)
}

#[test]
fn tuning_never_regresses_and_history_is_monotone() {
    for seed in 1..=3 {
        let (initial, r, again) = short_problem_run(seed);
        assert!(r.best_cost <= initial, "seed {seed}: {} > {initial}", r.best_cost);
        assert!(
            r.history.windows(2).all(|w| w[1] <= w[0]),
            "seed {seed}: {:?}",
            r.history
        );
        assert_eq!(again, r.best_cost, "seed {seed}: re-evaluation differs");
        assert_eq!(r.trajectory.len(), 4);
    }
}

#[test]
fn tuning_run_is_reproducible() {
    let (_, a, _) = short_problem_run(5);
    let (_, b, _) = short_problem_run(5);
    assert_eq!(a, b);
}
