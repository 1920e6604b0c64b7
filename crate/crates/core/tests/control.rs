use dcmg_core::control::*;
use dcmg_core::plant::{PlantParams, PlantState};
use proptest::prelude::*;

fn fuzzy() -> FuzzyController {
    FuzzyController::new(&build_initial_fis()).unwrap()
}

fn pi_config() -> ControllerConfig {
    ControllerConfig {
        kind: ControllerKind::Pi,
        ..Default::default()
    }
}

fn state_at(p: &PlantParams, v_bus: f64, soc_b: f64, soc_u: f64) -> PlantState {
    PlantState {
        v_bus,
        ..PlantState::at_rest(p, soc_b, soc_u)
    }
}

#[test]
fn cascade_at_nominal_commands_nothing() {
    let p = PlantParams::default();
    let mut st = ControllerState::default();
    let cmd = pi_cascade_control(&state_at(&p, 100.0, 0.5, 0.6), &pi_config(), &p, &mut st, 1e-4);
    assert_eq!(cmd.refs, CurrentRefs::default());
}

#[test]
fn cascade_sagging_bus_discharges_storage() {
    let p = PlantParams::default();
    let mut st = ControllerState::default();
    let cmd = pi_cascade_control(&state_at(&p, 99.0, 0.5, 0.6), &pi_config(), &p, &mut st, 1e-3);
    assert!(cmd.refs.battery > 0.0 && cmd.refs.ultracap > 0.0, "{:?}", cmd.refs);
    assert_eq!(cmd.refs.ovd, 0.0);
}

#[test]
fn cascade_engages_ovd_only_with_full_storage() {
    let p = PlantParams::default();
    let cfg = pi_config();
    let mut st = ControllerState::default();
    let full = pi_cascade_control(&state_at(&p, 102.0, 1.0, 1.0), &cfg, &p, &mut st, 1e-3);
    assert!(full.refs.ovd > 0.0);
    let mut st = ControllerState::default();
    let mid = pi_cascade_control(&state_at(&p, 102.0, 0.5, 0.6), &cfg, &p, &mut st, 1e-3);
    assert_eq!(mid.refs.ovd, 0.0);
}

#[test]
fn fuzzy_quiescent_at_zero_error() {
    let p = PlantParams::default();
    let cfg = ControllerConfig::default();
    let fc = fuzzy();
    for (sb, su) in [(0.5, 0.5), (0.5, 0.6), (0.4, 0.6)] {
        let mut st = ControllerState::default();
        let refs = fc
            .references(&state_at(&p, 100.0, sb, su), &cfg.scales, &p, &mut st, 1e-3)
            .unwrap();
        let s = &cfg.scales;
        assert!(refs.battery.abs() <= 0.02 * s.i_b_base, "{refs:?}");
        assert!(refs.ultracap.abs() <= 0.02 * s.i_u_base, "{refs:?}");
        assert!(refs.ovd.abs() <= 0.02 * s.i_o_base, "{refs:?}");
    }
}

#[test]
fn fuzzy_rule_one_charges_hard() {
    let y = fuzzy().evaluate(-0.5, -0.3, 0.5, 0.9).unwrap();
    assert!(y[0] < -0.5, "i_b = {}", y[0]);
}

#[test]
fn fuzzy_sagging_bus_discharges_battery() {
    let y = fuzzy().evaluate(0.02, 0.01, 0.5, 0.5).unwrap();
    assert!(y[0] > 0.0 && y[0] <= 1.0, "i_b = {}", y[0]);
}

#[test]
fn fuzzy_transfers_from_ultracap_to_battery() {
    let y = fuzzy().evaluate(0.0, 0.0, 0.05, 0.95).unwrap();
    assert!(y[1] > 0.0 && y[0] < 0.0, "{y:?}");
}

#[test]
fn fuzzy_engages_ovd_with_full_storage_and_high_bus() {
    let p = PlantParams::default();
    let cfg = ControllerConfig::default();
    let mut st = ControllerState {
        error_integral: -cfg.scales.ie_scale,
        ..Default::default()
    };
    let refs = fuzzy()
        .references(&state_at(&p, 102.0, 1.0, 1.0), &cfg.scales, &p, &mut st, 1e-3)
        .unwrap();
    assert!(refs.ovd > 0.0, "{refs:?}");
}

#[test]
fn fuzzy_battery_response_is_monotone() {
    let fc = fuzzy();
    let ys: Vec<f64> = (0..=20)
        .map(|k| {
            let e = -1.0 + 0.1 * k as f64;
            fc.evaluate(e, e, 0.5, 0.5).unwrap()[0]
        })
        .collect();
    assert!(ys.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{ys:?}");
}

#[test]
fn initial_system_shape() {
    let fis = build_initial_fis();
    let ib = fis.output(OUTPUT_I_B).unwrap();
    assert_eq!(ib.mfs.len(), 5);
    assert_eq!(ib.mf("Z").unwrap().center, 0.0);
    let iu = fis.output(OUTPUT_I_U).unwrap();
    assert_eq!(iu.mfs.len(), 4);
    assert!(iu.mfs.iter().all(|m| m.center != 0.0));
    assert_eq!(fis.output(OUTPUT_I_O).unwrap().mfs.len(), 3);
    assert_eq!(fis.rules.len(), 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn memoryless_without_integral(kp in 0.0..10.0f64, e in -5.0..5.0f64, junk in -100.0..100.0f64) {
        let g = PiGains::new(kp, 0.0, -20.0, 20.0);
        let fresh = pi_step(PiState::default(), &g, e, 1e-3).0;
        let used = pi_step(PiState { integral: junk, last_output: junk }, &g, e, 1e-3).0;
        prop_assert_eq!(fresh, used);
    }

    #[test]
    fn duties_stay_in_range(
        v in 60.0..140.0f64,
        i_b in -30.0..30.0f64,
        i_u in -30.0..30.0f64,
        i_o in 0.0..20.0f64,
        soc_b in 0.0..=1.0f64,
        soc_u in 0.0..=1.0f64,
        integral in -5.0..5.0f64,
    ) {
        let p = PlantParams::default();
        let mut s = state_at(&p, v, soc_b, soc_u);
        s.i_l.battery = i_b;
        s.i_l.ultracap = i_u;
        s.i_l.ovd = i_o;
        let cfg = ControllerConfig::default();
        let fc = fuzzy();
        let mut st = ControllerState { error_integral: integral, ..Default::default() };
        let fz = fuzzy_control(&s, &fc, &cfg, &p, &mut st, 1e-3).unwrap();
        let mut st = ControllerState::default();
        let pi = pi_cascade_control(&s, &pi_config(), &p, &mut st, 1e-3);
        for cmd in [fz, pi] {
            for d in [cmd.duties.battery, cmd.duties.ultracap, cmd.duties.ovd] {
                prop_assert!((0.0..=p.d_max).contains(&d));
            }
            prop_assert!(cmd.refs.ovd >= 0.0);
        }
    }

    /// With no accumulated error, the storage references push the bus the
    /// way the error asks whenever neither storage element is near a bound.
    #[test]
    fn static_sign_agreement(
        e in prop_oneof![-1.0..-0.05f64, 0.05..1.0f64],
        soc_b in 0.3..=0.7f64,
        soc_u in 0.25..=0.75f64,
    ) {
        let s = NormalizationScales::default();
        let y = fuzzy().evaluate(e, 0.0, soc_b, soc_u).unwrap();
        let total = y[0] * s.i_b_base + y[1] * s.i_u_base;
        prop_assert!(total * e > 0.0, "e = {}, refs = {:?}", e, y);
    }
}
