use dcmg_core::plant::PlantParams;
use dcmg_core::scenario::*;
use proptest::prelude::*;

/// Time-averaged source minus load minus ballast draw at nominal voltage.
fn mean_net_power(s: &ScenarioSpec) -> f64 {
    let p = PlantParams::default();
    let ballast = p.v_nominal * p.v_nominal / p.ballast_resistor;
    let src = generate_profile(&s.source);
    let load = generate_profile(&s.load);
    let n = 15_000;
    let dt = s.duration / n as f64;
    (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            src.at(t) - load.at(t) - ballast
        })
        .sum::<f64>()
        / n as f64
}

#[test]
fn surplus_and_deficit_have_opposite_net_power() {
    for seed in 0..20 {
        let up = mean_net_power(&make_scenario(Regime::Surplus, seed));
        let down = mean_net_power(&make_scenario(Regime::Deficit, seed));
        assert!(up > 0.0 && down < 0.0, "seed {seed}: surplus {up} W, deficit {down} W");
    }
}

#[test]
fn standard_segment_counts() {
    let s = make_scenario(Regime::Balanced, 3);
    assert_eq!(generate_profile(&s.source).values.len(), 15);
    assert_eq!(generate_profile(&s.load).values.len(), 50);
}

#[test]
fn golden_profiles() {
    let src = generate_profile(&make_scenario(Regime::Surplus, 0).source);
    assert_eq!(
        src.values[..4],
        [
            441.8150830853124,
            451.10620333740917,
            366.4440706411157,
            307.8340174750782
        ]
    );
    let load = generate_profile(&make_scenario(Regime::Balanced, 42).load);
    assert_eq!(
        load.values[..4],
        [
            313.91018417487993,
            240.47759757345577,
            244.1013345817332,
            295.6235133341837
        ]
    );
    assert_eq!(segment_uniform(42, 2), 0.1836103536378716);
}

#[test]
fn source_draw_is_affine_in_the_uniform() {
    let s = make_scenario(Regime::Deficit, 9);
    let p = generate_profile(&s.source);
    let [lo, hi] = s.source.power_range;
    for (k, v) in p.values.iter().enumerate() {
        assert_eq!(*v, lo + (hi - lo) * segment_uniform(9, k as u64));
    }
}

#[test]
fn regenerating_is_identical() {
    for r in Regime::ALL {
        let a = make_scenario(r, 11);
        let b = make_scenario(r, 11);
        assert_eq!(a, b);
        assert_eq!(generate_profile(&a.load), generate_profile(&b.load));
    }
}

#[test]
fn different_seeds_differ() {
    let a = generate_profile(&make_scenario(Regime::Balanced, 1).source);
    let b = generate_profile(&make_scenario(Regime::Balanced, 2).source);
    assert_ne!(a, b);
}

proptest! {
    #[test]
    fn profile_values_stay_in_range(seed in any::<u64>(), lo in 0.0..500.0f64, span in 0.0..500.0f64) {
        let spec = ProfileSpec { hold_time: 3.0, power_range: [lo, lo + span], seed, duration: 30.0 };
        for v in generate_profile(&spec).values {
            prop_assert!(v >= lo && v <= lo + span);
        }
    }

    #[test]
    fn throughput_ignores_current_sign(currents in prop::collection::vec(-30.0..30.0f64, 2..200)) {
        let row = |i: f64| LogRow { i_batt: i, ..Default::default() };
        let mut fwd = RunLog::new(1e-3);
        let mut rev = RunLog::new(1e-3);
        for (k, &i) in currents.iter().enumerate() {
            fwd.rows.push(LogRow { t: k as f64 * 1e-3, ..row(i) });
            rev.rows.push(LogRow { t: k as f64 * 1e-3, ..row(-i) });
        }
        prop_assert_eq!(battery_throughput(&fwd).unwrap(), battery_throughput(&rev).unwrap());
    }
}
