//! Averaged-model DC microgrid.
//!
//! One bus capacitor is fed by a boost-converted source and by the
//! stabilizer: a battery and an ultracapacitor behind bidirectional boost
//! converters, plus an over-voltage discharge (OVD) chopper that burns
//! power in a resistor. The bus also carries a permanent ballast resistor
//! and a constant-power load realized as `R = v^2 / p`.
//!
//! Currents are positive when storage injects into the bus. The OVD
//! current is positive when drawn from the bus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("numerical divergence at t = {t:.6} s: {what}")]
    Divergence { t: f64, what: String },
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("invalid step size {0}")]
    InvalidStep(f64),
}

/// Largest integration step accepted by [`step`].
pub const MAX_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Open-circuit voltage at 0 % SOC.
    pub v_floor: f64,
    /// Equivalent series capacitor modelling stored charge.
    pub c_equiv: f64,
    /// Voltage span between empty and full.
    pub v_span: f64,
    pub r_int: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            v_floor: 47.2,
            c_equiv: 3000.0,
            v_span: 3.6,
            r_int: 0.05,
        }
    }
}

impl BatteryParams {
    /// Charge between empty and full, in coulombs.
    pub fn capacity(&self) -> f64 {
        self.c_equiv * self.v_span
    }

    pub fn open_circuit_voltage(&self, q_batt: f64) -> f64 {
        self.v_floor + q_batt / self.c_equiv
    }

    /// Terminal voltage; `i_batt > 0` discharges.
    pub fn terminal_voltage(&self, q_batt: f64, i_batt: f64) -> f64 {
        self.open_circuit_voltage(q_batt) - i_batt * self.r_int
    }

    pub fn soc(&self, q_batt: f64) -> f64 {
        q_batt / self.capacity()
    }

    /// Energy stored above the empty state.
    pub fn energy(&self, q_batt: f64) -> f64 {
        self.v_floor * q_batt + q_batt * q_batt / (2.0 * self.c_equiv)
    }
}

/// Battery terminal voltage under the default battery model.
pub fn battery_terminal_voltage(q_batt: f64, i_batt: f64) -> f64 {
    BatteryParams::default().terminal_voltage(q_batt, i_batt)
}

/// Battery SOC under the default battery model.
pub fn soc_battery(q_batt: f64) -> f64 {
    BatteryParams::default().soc(q_batt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UltracapParams {
    pub c: f64,
    pub v_rated: f64,
    pub r_int: f64,
}

impl Default for UltracapParams {
    fn default() -> Self {
        Self {
            c: 150.0,
            v_rated: 54.0,
            r_int: 0.02,
        }
    }
}

impl UltracapParams {
    /// Voltage-ratio state of charge.
    pub fn soc(&self, v_uc: f64) -> f64 {
        v_uc / self.v_rated
    }

    pub fn voltage_at_soc(&self, soc: f64) -> f64 {
        soc * self.v_rated
    }

    pub fn energy(&self, v_uc: f64) -> f64 {
        0.5 * self.c * v_uc * v_uc
    }
}

/// Renewable source behind a boost converter tracking a power target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    pub v_in: f64,
    /// Power-tracking PI, duty per watt.
    pub kp: f64,
    /// Duty per watt-second.
    pub ki: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            v_in: 48.0,
            kp: 2e-4,
            ki: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchInductance {
    pub source: f64,
    pub battery: f64,
    pub ultracap: f64,
    pub ovd: f64,
}

impl Default for BranchInductance {
    fn default() -> Self {
        Self {
            source: 1e-3,
            battery: 1e-3,
            ultracap: 1e-3,
            ovd: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentLimits {
    pub i_b_max: f64,
    pub i_u_max: f64,
    pub i_o_max: f64,
}

impl Default for CurrentLimits {
    fn default() -> Self {
        Self {
            i_b_max: 20.0,
            i_u_max: 40.0,
            i_o_max: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub v_nominal: f64,
    pub c_bus: f64,
    pub l_branch: BranchInductance,
    pub battery: BatteryParams,
    pub ultracap: UltracapParams,
    pub source: SourceParams,
    pub ovd_resistor: f64,
    pub ballast_resistor: f64,
    /// Stand-in resistance for an open circuit.
    pub r_open: f64,
    /// Load powers at or below this are treated as open circuit.
    pub p_min: f64,
    pub d_max: f64,
    pub current_limits: CurrentLimits,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            v_nominal: 100.0,
            c_bus: 0.01,
            l_branch: BranchInductance::default(),
            battery: BatteryParams::default(),
            ultracap: UltracapParams::default(),
            source: SourceParams::default(),
            ovd_resistor: 5.0,
            ballast_resistor: 200.0,
            r_open: 1e9,
            p_min: 1e-6,
            d_max: 0.95,
            current_limits: CurrentLimits::default(),
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("v_nominal", self.v_nominal),
            ("c_bus", self.c_bus),
            ("l_branch.source", self.l_branch.source),
            ("l_branch.battery", self.l_branch.battery),
            ("l_branch.ultracap", self.l_branch.ultracap),
            ("l_branch.ovd", self.l_branch.ovd),
            ("battery.c_equiv", self.battery.c_equiv),
            ("battery.v_floor", self.battery.v_floor),
            ("battery.v_span", self.battery.v_span),
            ("ultracap.c", self.ultracap.c),
            ("ultracap.v_rated", self.ultracap.v_rated),
            ("source.v_in", self.source.v_in),
            ("ovd_resistor", self.ovd_resistor),
            ("ballast_resistor", self.ballast_resistor),
            ("r_open", self.r_open),
            ("p_min", self.p_min),
            ("current_limits.i_b_max", self.current_limits.i_b_max),
            ("current_limits.i_u_max", self.current_limits.i_u_max),
            ("current_limits.i_o_max", self.current_limits.i_o_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlantError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("battery.r_int", self.battery.r_int),
            ("ultracap.r_int", self.ultracap.r_int),
            ("source.kp", self.source.kp),
            ("source.ki", self.source.ki),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PlantError::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.d_max > 0.0 && self.d_max < 1.0) {
            return Err(PlantError::InvalidParams(format!(
                "d_max must lie in (0, 1), got {}",
                self.d_max
            )));
        }
        Ok(())
    }

    /// Ballast power at nominal voltage.
    pub fn ballast_power(&self) -> f64 {
        self.v_nominal * self.v_nominal / self.ballast_resistor
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchCurrents {
    pub source: f64,
    pub battery: f64,
    pub ultracap: f64,
    pub ovd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub v_bus: f64,
    /// Inductor currents.
    pub i_l: BranchCurrents,
    /// Battery charge above the empty state, coulombs.
    pub q_batt: f64,
    pub v_uc: f64,
    pub t: f64,
}

impl PlantState {
    /// Bus at nominal, all inductors de-energized.
    pub fn at_rest(params: &PlantParams, soc_b: f64, soc_u: f64) -> Self {
        Self {
            v_bus: params.v_nominal,
            i_l: BranchCurrents::default(),
            q_batt: soc_b.clamp(0.0, 1.0) * params.battery.capacity(),
            v_uc: params.ultracap.voltage_at_soc(soc_u.clamp(0.0, 1.0)),
            t: 0.0,
        }
    }

    pub fn soc_b(&self, params: &PlantParams) -> f64 {
        params.battery.soc(self.q_batt)
    }

    pub fn soc_u(&self, params: &PlantParams) -> f64 {
        params.ultracap.soc(self.v_uc)
    }

    /// Power delivered by the source into its converter.
    pub fn source_power(&self, params: &PlantParams) -> f64 {
        params.source.v_in * self.i_l.source
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExogenousInputs {
    pub p_source_target: f64,
    pub p_load_target: f64,
}

/// Converter duty cycles, each in `[0, d_max]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Duties {
    pub source: f64,
    pub battery: f64,
    pub ultracap: f64,
    pub ovd: f64,
}

impl Duties {
    pub fn clamped(self, d_max: f64) -> Self {
        let c = |d: f64| if d.is_nan() { 0.0 } else { d.clamp(0.0, d_max) };
        Self {
            source: c(self.source),
            battery: c(self.battery),
            ultracap: c(self.ultracap),
            ovd: c(self.ovd),
        }
    }
}

/// Equivalent resistance imposed by a load drawing `p_load_target` at `v_bus`.
pub fn load_resistance(p_load_target: f64, v_bus: f64, params: &PlantParams) -> f64 {
    if !(p_load_target > params.p_min) {
        return params.r_open;
    }
    (v_bus * v_bus / p_load_target).min(params.r_open)
}

// state vector layout
const V_BUS: usize = 0;
const I_S: usize = 1;
const I_B: usize = 2;
const I_U: usize = 3;
const I_O: usize = 4;
const Q_B: usize = 5;
const V_UC: usize = 6;
const N: usize = 7;

type Vector = [f64; N];

fn pack(s: &PlantState) -> Vector {
    [
        s.v_bus,
        s.i_l.source,
        s.i_l.battery,
        s.i_l.ultracap,
        s.i_l.ovd,
        s.q_batt,
        s.v_uc,
    ]
}

fn unpack(x: &Vector, t: f64) -> PlantState {
    PlantState {
        v_bus: x[V_BUS],
        i_l: BranchCurrents {
            source: x[I_S],
            battery: x[I_B],
            ultracap: x[I_U],
            ovd: x[I_O],
        },
        q_batt: x[Q_B],
        v_uc: x[V_UC],
        t,
    }
}

/// Flows that cross the bus node plus the resistive losses, at one state.
#[derive(Debug, Clone, Copy)]
struct Flows {
    i_load: f64,
    i_ballast: f64,
    v_batt: f64,
    v_uc_term: f64,
}

fn flows(x: &Vector, exo: &ExogenousInputs, p: &PlantParams) -> Flows {
    let v = x[V_BUS];
    Flows {
        i_load: v / load_resistance(exo.p_load_target, v, p),
        i_ballast: v / p.ballast_resistor,
        v_batt: p.battery.terminal_voltage(x[Q_B], x[I_B]),
        v_uc_term: x[V_UC] - x[I_U] * p.ultracap.r_int,
    }
}

fn derivatives(x: &Vector, d: &Duties, exo: &ExogenousInputs, p: &PlantParams) -> Vector {
    let v = x[V_BUS];
    let f = flows(x, exo, p);
    let l = &p.l_branch;
    // source and OVD stages conduct one way only
    let i_s = x[I_S].max(0.0);
    let i_o = x[I_O].max(0.0);
    let blocked = |i: f64, di: f64| if i <= 0.0 && di < 0.0 { 0.0 } else { di };
    // storage at a bound disconnects for currents that push further
    let guard = |i: f64, di: f64, full: bool, empty: bool| {
        if full && i <= 0.0 {
            (0.0, di.max(0.0))
        } else if empty && i >= 0.0 {
            (0.0, di.min(0.0))
        } else {
            (i, di)
        }
    };
    let (i_b, di_b) = guard(
        x[I_B],
        (f.v_batt - (1.0 - d.battery) * v) / l.battery,
        x[Q_B] >= p.battery.capacity(),
        x[Q_B] <= 0.0,
    );
    let (i_u, di_u) = guard(
        x[I_U],
        (f.v_uc_term - (1.0 - d.ultracap) * v) / l.ultracap,
        x[V_UC] >= p.ultracap.v_rated,
        x[V_UC] <= 0.0,
    );
    let i_bus = (1.0 - d.source) * i_s + (1.0 - d.battery) * i_b + (1.0 - d.ultracap) * i_u
        - d.ovd * i_o
        - f.i_load
        - f.i_ballast;
    [
        i_bus / p.c_bus,
        blocked(x[I_S], (p.source.v_in - (1.0 - d.source) * v) / l.source),
        di_b,
        di_u,
        blocked(x[I_O], (d.ovd * v - p.ovd_resistor * i_o) / l.ovd),
        -i_b,
        -i_u / p.ultracap.c,
    ]
}

fn axpy(x: &Vector, h: f64, k: &Vector) -> Vector {
    std::array::from_fn(|i| x[i] + h * k[i])
}

/// Advances the plant by one classical RK4 step with duties and exogenous
/// powers held over the step, then applies the physical bounds: storage
/// charge is clamped to its range with the branch current zeroed if it
/// pushes further, and the unidirectional source and OVD currents are kept
/// non-negative.
pub fn step(
    state: &PlantState,
    duties: &Duties,
    exo: &ExogenousInputs,
    params: &PlantParams,
    dt: f64,
) -> Result<PlantState, PlantError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(PlantError::InvalidStep(dt));
    }
    let d = duties.clamped(params.d_max);
    let x = pack(state);
    let k1 = derivatives(&x, &d, exo, params);
    let k2 = derivatives(&axpy(&x, 0.5 * dt, &k1), &d, exo, params);
    let k3 = derivatives(&axpy(&x, 0.5 * dt, &k2), &d, exo, params);
    let k4 = derivatives(&axpy(&x, dt, &k3), &d, exo, params);
    let mut next: Vector = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let t = state.t + dt;

    if let Some(i) = next.iter().position(|v| !v.is_finite()) {
        return Err(PlantError::Divergence {
            t,
            what: format!("state component {i} is not finite"),
        });
    }
    if next[V_BUS] <= 0.0 {
        return Err(PlantError::Divergence {
            t,
            what: format!("bus voltage collapsed to {:.3} V", next[V_BUS]),
        });
    }

    let q_max = params.battery.capacity();
    if next[Q_B] >= q_max {
        next[Q_B] = q_max;
        if next[I_B] < 0.0 {
            next[I_B] = 0.0;
        }
    } else if next[Q_B] <= 0.0 {
        next[Q_B] = 0.0;
        if next[I_B] > 0.0 {
            next[I_B] = 0.0;
        }
    }
    if next[V_UC] >= params.ultracap.v_rated {
        next[V_UC] = params.ultracap.v_rated;
        if next[I_U] < 0.0 {
            next[I_U] = 0.0;
        }
    } else if next[V_UC] <= 0.0 {
        next[V_UC] = 0.0;
        if next[I_U] > 0.0 {
            next[I_U] = 0.0;
        }
    }
    next[I_S] = next[I_S].max(0.0);
    next[I_O] = next[I_O].max(0.0);

    Ok(unpack(&next, t))
}

/// Energy held in the bus capacitor, inductors and both storage elements.
pub fn stored_energy(state: &PlantState, params: &PlantParams) -> f64 {
    let l = &params.l_branch;
    let i = &state.i_l;
    0.5 * params.c_bus * state.v_bus * state.v_bus
        + 0.5
            * (l.source * i.source * i.source
                + l.battery * i.battery * i.battery
                + l.ultracap * i.ultracap * i.ultracap
                + l.ovd * i.ovd * i.ovd)
        + params.battery.energy(state.q_batt)
        + params.ultracap.energy(state.v_uc)
}

/// Power entering from the source and power dissipated in every resistor.
pub fn power_flows(state: &PlantState, exo: &ExogenousInputs, params: &PlantParams) -> (f64, f64) {
    let x = pack(state);
    let f = flows(&x, exo, params);
    let v = state.v_bus;
    let i = &state.i_l;
    let p_in = params.source.v_in * i.source;
    let p_loss = v * (f.i_load + f.i_ballast)
        + params.ovd_resistor * i.ovd * i.ovd
        + params.battery.r_int * i.battery * i.battery
        + params.ultracap.r_int * i.ultracap * i.ultracap;
    (p_in, p_loss)
}

/// Instantaneous `P_in - P_consumed - dE/dt`; zero for an exact model.
pub fn power_balance_residual(state: &PlantState, duties: &Duties, exo: &ExogenousInputs, params: &PlantParams) -> f64 {
    let d = duties.clamped(params.d_max);
    let x = pack(state);
    let dx = derivatives(&x, &d, exo, params);
    let l = &params.l_branch;
    let de_dt = params.c_bus * x[V_BUS] * dx[V_BUS]
        + l.source * x[I_S] * dx[I_S]
        + l.battery * x[I_B] * dx[I_B]
        + l.ultracap * x[I_U] * dx[I_U]
        + l.ovd * x[I_O] * dx[I_O]
        + params.battery.open_circuit_voltage(x[Q_B]) * dx[Q_B]
        + params.ultracap.c * x[V_UC] * dx[V_UC];
    let (p_in, p_loss) = power_flows(state, exo, params);
    p_in - p_loss - de_dt
}
