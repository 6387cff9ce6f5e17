//! Electro-thermal battery model: parameters, drive cycles and the
//! single-step Euler dynamics shared by every planner.

pub mod cycle;
pub mod defaults;
pub mod params;
pub mod table;

use serde::{Deserialize, Serialize};

pub use cycle::{CycleSample, DriveCycle};
pub use params::{current_from, VehicleParams, KELVIN_OFFSET};
pub use table::{Table1D, Table2D};

use crate::error::{Error, Result};

/// State of charge (fraction) and battery temperature (celsius).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub soc: f64,
    pub tb: f64,
}

impl State {
    pub const fn new(soc: f64, tb: f64) -> Self {
        State { soc, tb }
    }
}

/// Control for one step: heater power routed to the battery at cycle sample `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    pub p_hvch_batt: f64,
    pub k: usize,
}

/// Per-step power flows. Heat terms are positive into the battery.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerBreakdown {
    /// Power after internal resistive losses.
    pub p_terminal: f64,
    /// Power drawn from the cells, `p_terminal + q_joule`.
    pub p_battery: f64,
    pub current: f64,
    pub q_joule: f64,
    pub q_ed: f64,
    pub q_leak: f64,
    /// `p_battery` fell outside the state-dependent charge/discharge limits.
    pub limit_violation: bool,
}

/// Exact tolerance for the heater ceiling check, in watts.
const HEADROOM_EPS_W: f64 = 1e-9;

fn check_control(params: &VehicleParams, sample: &CycleSample, p_hvch_batt: f64) -> Result<()> {
    if !(p_hvch_batt >= 0.0) {
        return Err(Error::Invalid(format!(
            "battery heater power must be non-negative, got {p_hvch_batt}"
        )));
    }
    if p_hvch_batt + sample.p_hvch_cabin_w > params.p_hvch_max_w + HEADROOM_EPS_W {
        return Err(Error::Invalid(format!(
            "battery heater {p_hvch_batt} W plus cabin {} W exceeds ceiling {} W",
            sample.p_hvch_cabin_w, params.p_hvch_max_w
        )));
    }
    Ok(())
}

/// Powers and heat flows with state-dependent quantities evaluated at `at`.
fn breakdown_at(
    params: &VehicleParams,
    at: State,
    p_hvch_batt: f64,
    sample: &CycleSample,
) -> Result<PowerBreakdown> {
    let p_terminal = sample.p_aux_w + sample.p_hvch_cabin_w + p_hvch_batt + sample.p_prop_w;
    let uoc = params.open_circuit_voltage(at.soc)?;
    let r = params.internal_resistance(at.tb)?;
    let current = current_from(uoc, r, p_terminal)?;
    let q_joule = r * current * current;
    let p_battery = p_terminal + q_joule;
    let (chg_min, dchg_max) = params.power_limits(at);
    Ok(PowerBreakdown {
        p_terminal,
        p_battery,
        current,
        q_joule,
        q_ed: params.ed_heat(sample.p_prop_w),
        q_leak: sample.gamma_w_per_k * (sample.t_amb_c - at.tb),
        limit_violation: p_battery < chg_min || p_battery > dchg_max,
    })
}

fn net_heat(params: &VehicleParams, b: &PowerBreakdown, p_hvch_batt: f64) -> f64 {
    params.eta_hvch * p_hvch_batt + b.q_leak + b.q_joule + b.q_ed
}

/// One explicit Euler step on an explicit sample, the hot path of every rollout.
pub fn step_sample(
    params: &VehicleParams,
    state: State,
    p_hvch_batt: f64,
    sample: &CycleSample,
    dt: f64,
) -> Result<(State, PowerBreakdown)> {
    check_control(params, sample, p_hvch_batt)?;
    let b = breakdown_at(params, state, p_hvch_batt, sample)?;
    let next = State {
        soc: state.soc - dt * b.current / params.capacity_as(),
        tb: state.tb + dt / params.thermal_capacitance * net_heat(params, &b, p_hvch_batt),
    };
    Ok((next, b))
}

/// Reverse step: recover the state at `k` from the state at `k+1`, with
/// voltage, resistance and leakage evaluated at the `k+1` state.
pub fn step_back_sample(
    params: &VehicleParams,
    state_next: State,
    p_hvch_batt: f64,
    sample: &CycleSample,
    dt: f64,
) -> Result<(State, PowerBreakdown)> {
    check_control(params, sample, p_hvch_batt)?;
    let b = breakdown_at(params, state_next, p_hvch_batt, sample)?;
    let prev = State {
        soc: state_next.soc + dt * b.current / params.capacity_as(),
        tb: state_next.tb - dt / params.thermal_capacitance * net_heat(params, &b, p_hvch_batt),
    };
    Ok((prev, b))
}

pub fn step_forward(
    params: &VehicleParams,
    state: State,
    inputs: StepInputs,
    cycle: &DriveCycle,
) -> Result<(State, PowerBreakdown)> {
    check_index(cycle, inputs.k)?;
    step_sample(
        params,
        state,
        inputs.p_hvch_batt,
        cycle.sample(inputs.k),
        cycle.dt(),
    )
    .map_err(|e| e.at_step(inputs.k))
}

pub fn step_backward(
    params: &VehicleParams,
    state_next: State,
    inputs: StepInputs,
    cycle: &DriveCycle,
) -> Result<(State, PowerBreakdown)> {
    check_index(cycle, inputs.k)?;
    step_back_sample(
        params,
        state_next,
        inputs.p_hvch_batt,
        cycle.sample(inputs.k),
        cycle.dt(),
    )
    .map_err(|e| e.at_step(inputs.k))
}

fn check_index(cycle: &DriveCycle, k: usize) -> Result<()> {
    if k >= cycle.steps() {
        return Err(Error::Invalid(format!(
            "step index {k} outside cycle of {} steps",
            cycle.steps()
        )));
    }
    Ok(())
}
