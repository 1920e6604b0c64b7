use dcmg_core::control::{build_initial_fis, ControllerConfig, ControllerKind};
use dcmg_core::plant::PlantParams;
use dcmg_core::scenario::{make_scenario, Regime, RunLog, ScenarioSpec};
use dcmg_core::sim::{ClosedLoop, SimError, SimSettings, Stabilizer};

fn run(kind: ControllerKind, scenario: &ScenarioSpec, settings: &SimSettings) -> Result<RunLog, SimError> {
    let plant = PlantParams::default();
    let controller = ControllerConfig {
        kind,
        ..Default::default()
    };
    let fis = build_initial_fis();
    let stabilizer = Stabilizer::new(kind, Some(&fis))?;
    ClosedLoop {
        plant: &plant,
        controller: &controller,
        stabilizer: &stabilizer,
        settings,
    }
    .run(scenario)
}

fn csv(log: &RunLog) -> Vec<u8> {
    let mut out = Vec::new();
    log.write_csv(&mut out).unwrap();
    out
}

fn assert_physical(log: &RunLog, what: &str) {
    for r in &log.rows {
        assert!((0.0..=1.0).contains(&r.soc_b), "{what}: soc_b {} at {}", r.soc_b, r.t);
        assert!((0.0..=1.0).contains(&r.soc_u), "{what}: soc_u {} at {}", r.soc_u, r.t);
        assert!(
            r.v_bus > 0.0 && r.v_bus.is_finite(),
            "{what}: v_bus {} at {}",
            r.v_bus,
            r.t
        );
        assert!(r.i_ovd >= 0.0, "{what}: i_ovd {} at {}", r.i_ovd, r.t);
    }
}

#[test]
fn shipped_scenarios_stay_physical() {
    let settings = SimSettings::default();
    for regime in Regime::ALL {
        for kind in [ControllerKind::Pi, ControllerKind::FuzzyInitial] {
            let log = run(kind, &make_scenario(regime, 1), &settings).unwrap();
            assert_eq!(log.rows.len(), 150_001);
            assert_physical(&log, &format!("{kind} {regime}"));
        }
    }
}

#[test]
fn full_storage_in_surplus_burns_the_excess() {
    let mut s = make_scenario(Regime::Surplus, 4).with_duration(20.0);
    s.soc_b = 1.0;
    s.soc_u = 1.0;
    for kind in [ControllerKind::Pi, ControllerKind::FuzzyInitial] {
        let log = run(kind, &s, &SimSettings::default()).unwrap();
        assert_physical(&log, &format!("{kind}"));
        let engaged = log.rows.iter().filter(|r| r.i_ovd > 0.5).count();
        assert!(engaged > log.rows.len() / 2, "{kind}: ovd engaged in {engaged} samples");
        let tail = &log.rows[log.rows.len() - 1000..];
        assert!(
            tail.iter().all(|r| (r.v_bus - 100.0).abs() < 2.0),
            "{kind}: bus not held"
        );
    }
}

#[test]
fn empty_storage_in_deficit_respects_the_lower_clamp() {
    let mut s = make_scenario(Regime::Deficit, 4).with_duration(10.0);
    s.soc_b = 0.002;
    s.soc_u = 0.002;
    match run(ControllerKind::Pi, &s, &SimSettings::default()) {
        Ok(log) => assert_physical(&log, "pi"),
        Err(e) => assert!(e.divergence_time().is_some(), "{e}"),
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let s = make_scenario(Regime::Balanced, 5).with_duration(30.0);
    let settings = SimSettings::default();
    for kind in [ControllerKind::Pi, ControllerKind::FuzzyInitial] {
        let a = csv(&run(kind, &s, &settings).unwrap());
        let b = csv(&run(kind, &s, &settings).unwrap());
        assert!(a == b, "{kind} logs differ");
    }
}

#[test]
fn seed_changes_the_run() {
    let settings = SimSettings::default();
    let a = run(
        ControllerKind::Pi,
        &make_scenario(Regime::Balanced, 1).with_duration(15.0),
        &settings,
    )
    .unwrap();
    let b = run(
        ControllerKind::Pi,
        &make_scenario(Regime::Balanced, 2).with_duration(15.0),
        &settings,
    )
    .unwrap();
    assert_ne!(csv(&a), csv(&b));
}

#[test]
fn control_period_must_be_a_multiple_of_dt() {
    let settings = SimSettings {
        control_period: 1.5e-4,
        ..Default::default()
    };
    let s = make_scenario(Regime::Balanced, 1).with_duration(1.0);
    assert!(matches!(
        run(ControllerKind::Pi, &s, &settings),
        Err(SimError::Settings(_))
    ));
}

#[test]
fn fuzzy_needs_a_system() {
    assert!(matches!(
        Stabilizer::new(ControllerKind::FuzzyTuned, None),
        Err(SimError::Settings(_))
    ));
    assert!(matches!(Stabilizer::new(ControllerKind::Pi, None), Ok(Stabilizer::Pi)));
}
