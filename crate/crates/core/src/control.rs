//! Stabilizer controllers.
//!
//! All three controllers share the same structure: an outer layer turns the
//! bus voltage (and, for the fuzzy ones, the storage SOCs) into current
//! references for the battery, ultracapacitor and OVD branches, and inner PI
//! loops turn those references into converter duties. The outer layer is
//! either a single voltage PI whose output is split across the branches, or
//! a Mamdani fuzzy system.
//!
//! Controller state is a plain value handed in and returned; nothing here
//! holds interior state.

use serde::{Deserialize, Serialize};

use crate::fis::{
    CompiledFis, FisDefinition, FisError, FuzzyVariable, MembershipFunction, Rule, DEFAULT_DEFUZZ_RESOLUTION,
};
use crate::plant::{Duties, PlantParams, PlantState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
    /// Output limits `[lo, hi]`.
    pub limits: [f64; 2],
    #[serde(default = "yes")]
    pub anti_windup: bool,
}

fn yes() -> bool {
    true
}

impl PiGains {
    pub fn new(kp: f64, ki: f64, lo: f64, hi: f64) -> Self {
        Self {
            kp,
            ki,
            limits: [lo, hi],
            anti_windup: true,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let [lo, hi] = self.limits;
        if !(self.kp >= 0.0 && self.ki >= 0.0 && self.kp.is_finite() && self.ki.is_finite()) {
            return Err(format!(
                "gains must be finite and >= 0 (kp = {}, ki = {})",
                self.kp, self.ki
            ));
        }
        if !(lo < hi) {
            return Err(format!("limits must satisfy lo < hi, got [{lo}, {hi}]"));
        }
        Ok(())
    }

    fn with_limits(&self, lo: f64, hi: f64) -> Self {
        Self {
            limits: [lo, hi],
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PiState {
    /// Accumulated error times seconds.
    pub integral: f64,
    pub last_output: f64,
}

/// One PI update with clamping anti-windup: the integral is frozen whenever
/// the unclamped output is beyond a limit in the direction the error pushes,
/// and it is kept inside the band where `ki * integral` stays within limits.
pub fn pi_step(state: PiState, gains: &PiGains, error: f64, dt: f64) -> (f64, PiState) {
    let [lo, hi] = gains.limits;
    let mut integral = state.integral + error * dt;
    let mut raw = gains.kp * error + gains.ki * integral;
    if gains.anti_windup {
        if (raw > hi && error > 0.0) || (raw < lo && error < 0.0) {
            integral = state.integral;
            raw = gains.kp * error + gains.ki * integral;
        }
        if gains.ki > 0.0 {
            integral = integral.clamp(lo.min(0.0) / gains.ki, hi.max(0.0) / gains.ki);
        }
    }
    let output = raw.clamp(lo, hi);
    (
        output,
        PiState {
            integral,
            last_output: output,
        },
    )
}

/// Duty for the source boost converter tracking a power target: the
/// averaged-boost feedforward `1 - v_in / v_bus` corrected by a PI on the
/// power error.
pub fn source_power_tracking_duty(
    tracker: PiState,
    plant: &PlantState,
    p_target: f64,
    params: &PlantParams,
    dt: f64,
) -> (f64, PiState) {
    let ff = (1.0 - params.source.v_in / plant.v_bus).clamp(0.0, params.d_max);
    let gains = PiGains::new(params.source.kp, params.source.ki, -ff, params.d_max - ff);
    let error = p_target.max(0.0) - plant.source_power(params);
    let (trim, next) = pi_step(tracker, &gains, error, dt);
    ((ff + trim).clamp(0.0, params.d_max), next)
}

/// Per-unit bases of the fuzzy controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationScales {
    /// Volts of bus error per unit.
    pub e_scale: f64,
    /// Volt-seconds of integrated error per unit.
    pub ie_scale: f64,
    pub i_b_base: f64,
    pub i_u_base: f64,
    pub i_o_base: f64,
    /// Per-unit OVD output below which the OVD branch stays off.
    pub ovd_activation: f64,
}

impl Default for NormalizationScales {
    fn default() -> Self {
        Self {
            e_scale: 5.0,
            ie_scale: 2.0,
            i_b_base: 20.0,
            i_u_base: 40.0,
            i_o_base: 20.0,
            ovd_activation: 0.4,
        }
    }
}

impl NormalizationScales {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("e_scale", self.e_scale),
            ("ie_scale", self.ie_scale),
            ("i_b_base", self.i_b_base),
            ("i_u_base", self.i_u_base),
            ("i_o_base", self.i_o_base),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.ovd_activation) {
            return Err(format!(
                "ovd_activation must lie in [0, 1), got {}",
                self.ovd_activation
            ));
        }
        Ok(())
    }

    /// OVD reference from the per-unit fuzzy output; never negative.
    pub fn ovd_reference(&self, y_o: f64) -> f64 {
        let a = self.ovd_activation;
        self.i_o_base * ((y_o.max(0.0) - a) / (1.0 - a)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Pi,
    FuzzyInitial,
    FuzzyTuned,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Pi,
        ControllerKind::FuzzyInitial,
        ControllerKind::FuzzyTuned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Pi => "pi",
            ControllerKind::FuzzyInitial => "fuzzy_initial",
            ControllerKind::FuzzyTuned => "fuzzy_tuned",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown controller kind `{s}` (expected pi, fuzzy_initial or fuzzy_tuned)"))
    }
}

/// Inner current loops, duty per amp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerGains {
    pub battery: PiGains,
    pub ultracap: PiGains,
    pub ovd: PiGains,
}

impl Default for InnerGains {
    fn default() -> Self {
        let g = PiGains::new(0.05, 5.0, -0.95, 0.95);
        Self {
            battery: g,
            ultracap: g,
            ovd: g,
        }
    }
}

/// Outer voltage loop of the PI baseline and its branch split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiCascadeConfig {
    /// Bus-side current demand in amps per volt of error.
    pub outer: PiGains,
    /// Time constant of the low-pass whose complement goes to the
    /// ultracapacitor.
    pub uc_highpass_tau: f64,
    /// SOC at which a storage element counts as charge-saturated.
    pub saturation_soc: f64,
}

impl Default for PiCascadeConfig {
    fn default() -> Self {
        Self {
            outer: PiGains::new(2.0, 20.0, -40.0, 40.0),
            uc_highpass_tau: 0.5,
            saturation_soc: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub pi: PiCascadeConfig,
    pub inner: InnerGains,
    pub scales: NormalizationScales,
    /// Tuned fuzzy system, required for `fuzzy_tuned`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fis_path: Option<std::path::PathBuf>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kind: ControllerKind::FuzzyInitial,
            pi: PiCascadeConfig::default(),
            inner: InnerGains::default(),
            scales: NormalizationScales::default(),
            fis_path: None,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.pi.outer.validate().map_err(|e| format!("pi.outer: {e}"))?;
        self.inner
            .battery
            .validate()
            .map_err(|e| format!("inner.battery: {e}"))?;
        self.inner
            .ultracap
            .validate()
            .map_err(|e| format!("inner.ultracap: {e}"))?;
        self.inner.ovd.validate().map_err(|e| format!("inner.ovd: {e}"))?;
        self.scales.validate()?;
        if !(self.pi.uc_highpass_tau > 0.0) {
            return Err("pi.uc_highpass_tau must be positive".into());
        }
        if !(self.pi.saturation_soc > 0.0 && self.pi.saturation_soc <= 1.0) {
            return Err("pi.saturation_soc must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// Current references in amps. Storage references are storage-side
/// inductor currents, positive into the bus; the OVD reference is the
/// resistor current and never negative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CurrentRefs {
    pub battery: f64,
    pub ultracap: f64,
    pub ovd: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BranchCommands {
    pub refs: CurrentRefs,
    /// Stabilizer duties; the source duty is left at zero here.
    pub duties: Duties,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerStates {
    pub battery: PiState,
    pub ultracap: PiState,
    pub ovd: PiState,
}

/// Everything a controller carries from one sample to the next.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerState {
    pub outer: PiState,
    /// Low-pass share of the PI baseline's demand.
    pub battery_share: f64,
    /// Running integral of the bus error, volt-seconds.
    pub error_integral: f64,
    pub inner: InnerStates,
}

fn clamp_refs(refs: CurrentRefs, params: &PlantParams) -> CurrentRefs {
    let lim = &params.current_limits;
    CurrentRefs {
        battery: refs.battery.clamp(-lim.i_b_max, lim.i_b_max),
        ultracap: refs.ultracap.clamp(-lim.i_u_max, lim.i_u_max),
        ovd: refs.ovd.clamp(0.0, lim.i_o_max),
    }
}

/// Outer layer of the PI baseline. The voltage PI yields a bus-side current
/// demand; its low-pass part goes to the battery, the complement to the
/// ultracapacitor, and only when both storage elements are charge-saturated
/// does the OVD take the absorbing part of the demand.
pub fn pi_outer_references(
    meas: &PlantState,
    cfg: &PiCascadeConfig,
    params: &PlantParams,
    state: &mut ControllerState,
    dt: f64,
) -> CurrentRefs {
    let error = params.v_nominal - meas.v_bus;
    let (demand, outer) = pi_step(state.outer, &cfg.outer, error, dt);
    state.outer = outer;
    let alpha = dt / (cfg.uc_highpass_tau + dt);
    state.battery_share += alpha * (demand - state.battery_share);
    let to_battery = state.battery_share;
    let to_ultracap = demand - to_battery;

    let v = meas.v_bus;
    let v_b = params.battery.open_circuit_voltage(meas.q_batt);
    let v_u = meas.v_uc.max(1.0);
    let saturated = meas.soc_b(params) >= cfg.saturation_soc && meas.soc_u(params) >= cfg.saturation_soc;
    let ovd = if saturated { (-demand).max(0.0) } else { 0.0 };
    clamp_refs(
        CurrentRefs {
            battery: to_battery * v / v_b,
            ultracap: to_ultracap * v / v_u,
            ovd,
        },
        params,
    )
}

/// Inner current loops: averaged-model feedforward plus PI on the current
/// error, producing duties in `[0, d_max]`.
pub fn inner_duties(
    meas: &PlantState,
    refs: &CurrentRefs,
    gains: &InnerGains,
    params: &PlantParams,
    states: &mut InnerStates,
    dt: f64,
) -> Duties {
    let v = meas.v_bus;
    let d_max = params.d_max;
    let track = |state: &mut PiState, g: &PiGains, ff: f64, reference: f64, measured: f64| {
        let ff = ff.clamp(0.0, d_max);
        let (trim, next) = pi_step(*state, &g.with_limits(-ff, d_max - ff), reference - measured, dt);
        *state = next;
        (ff + trim).clamp(0.0, d_max)
    };
    let v_b = params.battery.terminal_voltage(meas.q_batt, refs.battery);
    let v_u = meas.v_uc - refs.ultracap * params.ultracap.r_int;
    Duties {
        source: 0.0,
        battery: track(
            &mut states.battery,
            &gains.battery,
            1.0 - v_b / v,
            refs.battery,
            meas.i_l.battery,
        ),
        ultracap: track(
            &mut states.ultracap,
            &gains.ultracap,
            1.0 - v_u / v,
            refs.ultracap,
            meas.i_l.ultracap,
        ),
        ovd: track(
            &mut states.ovd,
            &gains.ovd,
            params.ovd_resistor * refs.ovd / v,
            refs.ovd,
            meas.i_l.ovd,
        ),
    }
}

/// Both layers of the PI baseline at one rate.
pub fn pi_cascade_control(
    meas: &PlantState,
    cfg: &ControllerConfig,
    params: &PlantParams,
    state: &mut ControllerState,
    dt: f64,
) -> BranchCommands {
    let refs = pi_outer_references(meas, &cfg.pi, params, state, dt);
    let duties = inner_duties(meas, &refs, &cfg.inner, params, &mut state.inner, dt);
    BranchCommands { refs, duties }
}

pub const INPUT_E: &str = "e";
pub const INPUT_IE: &str = "ie";
pub const INPUT_SOC_B: &str = "soc_b";
pub const INPUT_SOC_U: &str = "soc_u";
pub const OUTPUT_I_B: &str = "i_b";
pub const OUTPUT_I_U: &str = "i_u";
pub const OUTPUT_I_O: &str = "i_o";

/// Sigma of a shoulder Gaussian centred on a universe end such that the
/// degree falls to one half at `distance` from that end.
pub fn shoulder_sigma(distance: f64) -> f64 {
    distance / (2.0 * std::f64::consts::LN_2).sqrt()
}

const INITIAL_RULES: &str = include_str!("../data/initial_rules.toml");

#[derive(Deserialize)]
struct RuleTable {
    rules: Vec<Rule>,
}

/// Rules of the initial controller as shipped in `data/initial_rules.toml`.
pub fn initial_rules() -> Vec<Rule> {
    toml::from_str::<RuleTable>(INITIAL_RULES)
        .expect("bundled rule table parses")
        .rules
}

/// The expert fuzzy controller before tuning.
pub fn build_initial_fis() -> FisDefinition {
    let mf = MembershipFunction::new;
    let signed = |name: &str| FuzzyVariable::new(name, -1.0, 1.0, vec![mf("NEG", -1.0, 0.6), mf("POS", 1.0, 0.6)]);
    let soc = |name: &str, low_end: f64, high_start: f64| {
        FuzzyVariable::new(
            name,
            0.0,
            1.0,
            vec![
                mf("Low", 0.0, shoulder_sigma(low_end)),
                mf("High", 1.0, shoulder_sigma(1.0 - high_start)),
            ],
        )
    };
    FisDefinition {
        defuzz_resolution: DEFAULT_DEFUZZ_RESOLUTION,
        inputs: vec![
            signed(INPUT_E),
            signed(INPUT_IE),
            soc(INPUT_SOC_B, 0.3, 0.7),
            soc(INPUT_SOC_U, 0.25, 0.75),
        ],
        outputs: vec![
            FuzzyVariable::new(
                OUTPUT_I_B,
                -1.0,
                1.0,
                vec![
                    mf("VN", -1.0, 0.3),
                    mf("N", -0.75, 0.2),
                    mf("Z", 0.0, 0.12),
                    mf("P", 0.75, 0.2),
                    mf("VP", 1.0, 0.3),
                ],
            ),
            FuzzyVariable::new(
                OUTPUT_I_U,
                -1.0,
                1.0,
                vec![
                    mf("VN", -1.0, 0.2),
                    mf("N", -0.4, 0.2),
                    mf("P", 0.4, 0.2),
                    mf("VP", 1.0, 0.2),
                ],
            ),
            FuzzyVariable::new(
                OUTPUT_I_O,
                0.0,
                1.0,
                vec![mf("Z", 0.0, 0.2), mf("P", 0.5, 0.1), mf("VP", 1.0, 0.2)],
            ),
        ],
        rules: initial_rules(),
    }
}

/// A compiled fuzzy system bound to the controller's named inputs and
/// outputs.
#[derive(Debug, Clone)]
pub struct FuzzyController {
    fis: CompiledFis,
    /// Position of e, ie, soc_b, soc_u in the system's input list.
    input_slots: [usize; 4],
    /// Position of i_b, i_u, i_o in the system's output list.
    output_slots: [usize; 3],
}

impl FuzzyController {
    pub fn new(fis: &FisDefinition) -> Result<Self, FisError> {
        let compiled = CompiledFis::new(fis)?;
        let find = |vars: &[FuzzyVariable], name: &str| {
            vars.iter()
                .position(|v| v.name == name)
                .ok_or_else(|| FisError::UnknownVariable(name.to_string()))
        };
        let input_slots = [
            find(&fis.inputs, INPUT_E)?,
            find(&fis.inputs, INPUT_IE)?,
            find(&fis.inputs, INPUT_SOC_B)?,
            find(&fis.inputs, INPUT_SOC_U)?,
        ];
        if fis.inputs.len() != 4 {
            return Err(FisError::Invalid(format!(
                "controller expects exactly 4 inputs, got {}",
                fis.inputs.len()
            )));
        }
        let output_slots = [
            find(&fis.outputs, OUTPUT_I_B)?,
            find(&fis.outputs, OUTPUT_I_U)?,
            find(&fis.outputs, OUTPUT_I_O)?,
        ];
        Ok(Self {
            fis: compiled,
            input_slots,
            output_slots,
        })
    }

    pub fn definition(&self) -> &FisDefinition {
        self.fis.definition()
    }

    /// Per-unit outputs `[i_b, i_u, i_o]` for per-unit inputs.
    pub fn evaluate(&self, e: f64, ie: f64, soc_b: f64, soc_u: f64) -> Result<[f64; 3], FisError> {
        let mut x = [0.0; 4];
        for (slot, v) in self.input_slots.iter().zip([e, ie, soc_b, soc_u]) {
            x[*slot] = v;
        }
        let out = self.fis.infer(&x)?;
        Ok(self.output_slots.map(|s| out.values[s]))
    }

    /// Outer layer: normalize, infer, denormalize.
    pub fn references(
        &self,
        meas: &PlantState,
        scales: &NormalizationScales,
        params: &PlantParams,
        state: &mut ControllerState,
        dt: f64,
    ) -> Result<CurrentRefs, FisError> {
        let error = params.v_nominal - meas.v_bus;
        state.error_integral = (state.error_integral + error * dt).clamp(-scales.ie_scale, scales.ie_scale);
        let e = (error / scales.e_scale).clamp(-1.0, 1.0);
        let ie = state.error_integral / scales.ie_scale;
        let [y_b, y_u, y_o] = self.evaluate(e, ie, meas.soc_b(params), meas.soc_u(params))?;
        Ok(clamp_refs(
            CurrentRefs {
                battery: y_b * scales.i_b_base,
                ultracap: y_u * scales.i_u_base,
                ovd: scales.ovd_reference(y_o),
            },
            params,
        ))
    }
}

/// Both layers of a fuzzy controller at one rate.
pub fn fuzzy_control(
    meas: &PlantState,
    controller: &FuzzyController,
    cfg: &ControllerConfig,
    params: &PlantParams,
    state: &mut ControllerState,
    dt: f64,
) -> Result<BranchCommands, FisError> {
    let refs = controller.references(meas, &cfg.scales, params, state, dt)?;
    let duties = inner_duties(meas, &refs, &cfg.inner, params, &mut state.inner, dt);
    Ok(BranchCommands { refs, duties })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_pure_proportional() {
        let g = PiGains::new(1.0, 0.0, -10.0, 10.0);
        let (u, _) = pi_step(PiState::default(), &g, 0.5, 1e-3);
        assert_eq!(u, 0.5);
    }

    #[test]
    fn pi_integrator_ramp() {
        let g = PiGains::new(0.0, 2.0, -10.0, 10.0);
        let dt = 1e-3;
        let mut s = PiState::default();
        let mut u = 0.0;
        for _ in 0..1000 {
            (u, s) = pi_step(s, &g, 1.0, dt);
        }
        assert!((u - 2.0).abs() <= 2.0 * dt * 2.0, "u = {u}");
    }

    #[test]
    fn pi_clamps_without_winding_up() {
        let g = PiGains::new(10.0, 1.0, -1.0, 1.0);
        let start = PiState {
            integral: 0.1,
            last_output: 0.0,
        };
        let (u, s) = pi_step(start, &g, 1.0, 1e-3);
        assert_eq!(u, 1.0);
        assert_eq!(s.integral, 0.1);
        // an opposite error that stays inside the limits unwinds the integral
        let (_, s) = pi_step(s, &g, -0.05, 1e-3);
        assert!(s.integral < 0.1);
    }

    #[test]
    fn pi_without_integral_is_memoryless() {
        let g = PiGains::new(3.0, 0.0, -5.0, 5.0);
        let mut s = PiState::default();
        for e in [0.3, -2.0, 1.0, 0.3] {
            let (u, next) = pi_step(s, &g, e, 1e-3);
            assert_eq!(u, (3.0 * e).clamp(-5.0, 5.0));
            s = next;
        }
    }

    #[test]
    fn source_duty_feedforward_at_equilibrium() {
        let p = PlantParams::default();
        let mut s = PlantState::at_rest(&p, 0.5, 0.5);
        s.i_l.source = 200.0 / p.source.v_in;
        let (d, _) = source_power_tracking_duty(PiState::default(), &s, 200.0, &p, 1e-4);
        assert!((d - 0.52).abs() < 1e-12);
    }

    #[test]
    fn ovd_reference_dead_zone() {
        let s = NormalizationScales::default();
        assert_eq!(s.ovd_reference(0.0), 0.0);
        assert_eq!(s.ovd_reference(-0.4), 0.0);
        assert_eq!(s.ovd_reference(s.ovd_activation), 0.0);
        assert!((s.ovd_reference(1.0) - s.i_o_base).abs() < 1e-12);
    }

    #[test]
    fn shoulder_sigma_hits_half_at_breakpoint() {
        let f = build_initial_fis();
        let soc_b = f.input(INPUT_SOC_B).unwrap();
        assert!((soc_b.mf("Low").unwrap().degree(0.3) - 0.5).abs() < 1e-12);
        assert!((soc_b.mf("High").unwrap().degree(0.7) - 0.5).abs() < 1e-12);
        let soc_u = f.input(INPUT_SOC_U).unwrap();
        assert!((soc_u.mf("Low").unwrap().degree(0.25) - 0.5).abs() < 1e-12);
        assert!((soc_u.mf("High").unwrap().degree(0.75) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn initial_fis_shape() {
        let f = build_initial_fis();
        f.validate().unwrap();
        assert_eq!(f.rules.len(), 20);
        let i_b = f.output(OUTPUT_I_B).unwrap();
        assert_eq!(i_b.mfs.len(), 5);
        assert_eq!(i_b.mf("Z").unwrap().center, 0.0);
        let i_u = f.output(OUTPUT_I_U).unwrap();
        assert_eq!(i_u.mfs.len(), 4);
        assert!(i_u.mfs.iter().all(|m| m.center != 0.0));
        let i_o = f.output(OUTPUT_I_O).unwrap();
        assert_eq!(i_o.universe, [0.0, 1.0]);
        assert_eq!(i_o.mfs.len(), 3);
    }

    #[test]
    fn controller_kind_parses() {
        for k in ControllerKind::ALL {
            assert_eq!(k.name().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("mpc".parse::<ControllerKind>().is_err());
    }
}
