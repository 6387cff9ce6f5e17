//! C interface to the preheat planner.
//!
//! Handles are opaque and owned by the caller once returned through an
//! out-pointer; release each with its `_free` function (NULL is accepted).
//! Fallible calls return a [`PreheatStatus`]. On failure the out-pointer is
//! set to NULL and `preheat_last_error_message` describes the failure until
//! the next failing call on the same thread.
//!
//! Pointer arguments must be NULL or point to live objects of the stated
//! type. Strings are NUL-terminated UTF-8.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use preheat::config::{load_config, parse_config, Config};
use preheat::cycle_io::{load_cycle, synth_cycle, SynthSpec};
use preheat::model::PowerBreakdown;
use preheat::oracle::{solve_dp, DpSolution};
use preheat::{
    energy_report, plan_preheat, step_backward, step_forward, DriveCycle, EnergyReport, Error,
    State, StepInputs, Trajectory,
};

/// Result of a fallible call. Codes 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreheatStatus {
    Ok = 0,
    /// A required pointer was NULL or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// Unreadable, malformed or out-of-domain input.
    Input = 2,
    /// No control meets the arrival targets.
    Infeasible = 3,
    /// Numerical failure: grid too coarse, power infeasible, broken trajectory.
    Numerical = 4,
    /// Unexpected internal failure.
    Internal = 5,
}

impl PreheatStatus {
    fn of(e: &Error) -> Self {
        match e {
            Error::InfeasibleProblem(_) => PreheatStatus::Infeasible,
            Error::GridTooCoarse(_)
            | Error::PowerInfeasible { .. }
            | Error::Integrity(_)
            | Error::NoCrossing { .. } => PreheatStatus::Numerical,
            Error::Domain(_)
            | Error::Invalid(_)
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::Io { .. } => PreheatStatus::Input,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreheatState {
    pub soc: f64,
    pub tb_c: f64,
}

impl From<State> for PreheatState {
    fn from(s: State) -> Self {
        PreheatState {
            soc: s.soc,
            tb_c: s.tb,
        }
    }
}

impl From<PreheatState> for State {
    fn from(s: PreheatState) -> Self {
        State::new(s.soc, s.tb_c)
    }
}

/// Initial state and arrival targets used by `preheat_plan` and `preheat_dp_solve`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreheatScenario {
    pub soc0: f64,
    pub tb0_c: f64,
    pub soc_target: f64,
    pub tb_target_c: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreheatGrid {
    pub n_soc: usize,
    pub n_tb: usize,
    pub n_u: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PreheatBreakdown {
    pub p_terminal_w: f64,
    pub p_battery_w: f64,
    pub current_a: f64,
    pub q_joule_w: f64,
    pub q_ed_w: f64,
    pub q_leak_w: f64,
    pub limit_violation: bool,
}

impl From<PowerBreakdown> for PreheatBreakdown {
    fn from(b: PowerBreakdown) -> Self {
        PreheatBreakdown {
            p_terminal_w: b.p_terminal,
            p_battery_w: b.p_battery,
            current_a: b.current,
            q_joule_w: b.q_joule,
            q_ed_w: b.q_ed,
            q_leak_w: b.q_leak,
            limit_violation: b.limit_violation,
        }
    }
}

/// Energy totals over a trajectory, watt-hours.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PreheatEnergy {
    pub joule_heating_wh: f64,
    pub ed_heating_wh: f64,
    pub hvch_battery_heating_wh: f64,
    pub ambient_leakage_wh: f64,
    pub hvch_cabin_wh: f64,
    pub aux_wh: f64,
    pub prop_wh: f64,
    pub total_battery_wh: f64,
}

impl From<EnergyReport> for PreheatEnergy {
    fn from(r: EnergyReport) -> Self {
        PreheatEnergy {
            joule_heating_wh: r.joule_heating_wh,
            ed_heating_wh: r.ed_heating_wh,
            hvch_battery_heating_wh: r.hvch_battery_heating_wh,
            ambient_leakage_wh: r.ambient_leakage_wh,
            hvch_cabin_wh: r.hvch_cabin_wh,
            aux_wh: r.aux_wh,
            prop_wh: r.prop_wh,
            total_battery_wh: r.total_battery_wh,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreheatPlanSummary {
    /// Step at which the heater switches on, 0-based; equal to the step count when it never does.
    pub splice_index: usize,
    pub switch_time_s: f64,
    pub feasible: bool,
    pub terminal: PreheatState,
    pub energy: PreheatEnergy,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreheatDpSummary {
    pub cost_wh: f64,
    pub predicted_cost_wh: f64,
    pub bellman_max_residual_wh: f64,
    pub best_effort_steps: usize,
    pub switch_index: usize,
    pub terminal: PreheatState,
    pub energy: PreheatEnergy,
}

/// Vehicle parameters, DP grid, cycle column defaults and scenario.
pub struct PreheatConfig(Config);

pub struct PreheatCycle(DriveCycle);

pub struct PreheatPlan {
    trajectory: Trajectory,
    summary: PreheatPlanSummary,
}

pub struct PreheatDp {
    trajectory: Trajectory,
    summary: PreheatDpSummary,
}

struct LastError {
    kind: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

enum Fail {
    Arg(String),
    Core(Error),
    Panic,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn record(kind: &str, message: String) {
    let clean = |s: String| CString::new(s.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(LastError {
            kind: clean(kind.to_string()),
            message: clean(message),
        })
    });
}

fn run(f: impl FnOnce() -> Result<(), Fail>) -> PreheatStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or(Err(Fail::Panic));
    match outcome {
        Ok(()) => PreheatStatus::Ok,
        Err(Fail::Arg(m)) => {
            record("invalid_argument", m);
            PreheatStatus::InvalidArgument
        }
        Err(Fail::Core(e)) => {
            record(e.kind(), e.to_string());
            PreheatStatus::of(&e)
        }
        Err(Fail::Panic) => {
            record("internal", "internal panic caught at the C boundary".into());
            PreheatStatus::Internal
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::Arg(format!("{name} is NULL")))
}

unsafe fn get_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail::Arg(format!("{name} is NULL")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{name} is not valid UTF-8")))
}

/// Clear `out`, run `make`, and hand the result to the caller as a boxed handle.
unsafe fn produce<T>(out: *mut *mut T, make: impl FnOnce() -> Result<T, Fail>) -> PreheatStatus {
    if out.is_null() {
        return run(|| Err(Fail::Arg("out is NULL".into())));
    }
    *out = ptr::null_mut();
    run(|| {
        let value = make()?;
        *out = Box::into_raw(Box::new(value));
        Ok(())
    })
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copy up to `cap` items into `buf` and return the full length.
unsafe fn copy_out<T: Copy>(
    items: impl ExactSizeIterator<Item = T>,
    buf: *mut T,
    cap: usize,
) -> usize {
    let len = items.len();
    if !buf.is_null() {
        for (i, v) in items.take(cap).enumerate() {
            buf.add(i).write(v);
        }
    }
    len
}

fn report(traj: &Trajectory, cfg: &Config, cycle: &DriveCycle) -> Result<PreheatEnergy, Fail> {
    Ok(energy_report(traj, &cfg.vehicle, cycle)?.into())
}

/// Kind tag of the last failure on this thread (for example `"grid_too_coarse"`), or NULL.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn preheat_last_error_kind() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |e| e.kind.as_ptr())
    })
}

/// Message of the last failure on this thread, or NULL.
#[no_mangle]
pub extern "C" fn preheat_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |e| e.message.as_ptr())
    })
}

#[no_mangle]
pub extern "C" fn preheat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Shipped defaults.
#[no_mangle]
pub unsafe extern "C" fn preheat_config_default(out: *mut *mut PreheatConfig) -> PreheatStatus {
    produce(out, || Ok(PreheatConfig(Config::default())))
}

/// Load a TOML config file.
#[no_mangle]
pub unsafe extern "C" fn preheat_config_load(
    path: *const c_char,
    out: *mut *mut PreheatConfig,
) -> PreheatStatus {
    produce(out, || {
        Ok(PreheatConfig(load_config(Path::new(text(path, "path")?))?))
    })
}

/// Parse TOML config text. Relative limit CSV paths resolve against
/// `base_dir`, or the working directory when it is NULL.
#[no_mangle]
pub unsafe extern "C" fn preheat_config_parse(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut PreheatConfig,
) -> PreheatStatus {
    produce(out, || {
        let base = if base_dir.is_null() {
            "."
        } else {
            text(base_dir, "base_dir")?
        };
        Ok(PreheatConfig(parse_config(
            text(toml, "toml")?,
            Path::new(base),
        )?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_config_free(config: *mut PreheatConfig) {
    free(config)
}

#[no_mangle]
pub unsafe extern "C" fn preheat_config_get_scenario(
    config: *const PreheatConfig,
    out: *mut PreheatScenario,
) -> PreheatStatus {
    run(|| {
        let s = get(config, "config")?.0.scenario;
        *get_mut(out, "out")? = PreheatScenario {
            soc0: s.soc0,
            tb0_c: s.tb0_c,
            soc_target: s.soc_target,
            tb_target_c: s.tb_target_c,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_config_set_scenario(
    config: *mut PreheatConfig,
    scenario: PreheatScenario,
) -> PreheatStatus {
    run(|| {
        let cfg = get_mut(config, "config")?;
        let PreheatScenario {
            soc0,
            tb0_c,
            soc_target,
            tb_target_c,
        } = scenario;
        if ![soc0, tb0_c, soc_target, tb_target_c]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Invalid("non-finite scenario value".into()).into());
        }
        cfg.0.scenario = preheat::config::Scenario {
            soc0,
            tb0_c,
            soc_target,
            tb_target_c,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_config_get_grid(
    config: *const PreheatConfig,
    out: *mut PreheatGrid,
) -> PreheatStatus {
    run(|| {
        let g = get(config, "config")?.0.dp;
        *get_mut(out, "out")? = PreheatGrid {
            n_soc: g.n_soc,
            n_tb: g.n_tb,
            n_u: g.n_u,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_config_set_grid(
    config: *mut PreheatConfig,
    grid: PreheatGrid,
) -> PreheatStatus {
    run(|| {
        let cfg = get_mut(config, "config")?;
        let mut g = cfg.0.dp;
        g.n_soc = grid.n_soc;
        g.n_tb = grid.n_tb;
        g.n_u = grid.n_u;
        g.validate()?;
        cfg.0.dp = g;
        Ok(())
    })
}

/// Load a cycle CSV; missing optional columns take the config's cycle defaults.
#[no_mangle]
pub unsafe extern "C" fn preheat_cycle_load(
    config: *const PreheatConfig,
    path: *const c_char,
    out: *mut *mut PreheatCycle,
) -> PreheatStatus {
    produce(out, || {
        let cfg = get(config, "config")?;
        Ok(PreheatCycle(load_cycle(
            text(path, "path")?,
            &cfg.0.cycle_defaults,
        )?))
    })
}

/// The seeded one-hour synthetic cycle; seed 7 is the preset.
#[no_mangle]
pub unsafe extern "C" fn preheat_cycle_synth(
    config: *const PreheatConfig,
    seed: u64,
    out: *mut *mut PreheatCycle,
) -> PreheatStatus {
    produce(out, || {
        let cfg = get(config, "config")?;
        let spec = SynthSpec {
            seed,
            defaults: cfg.0.cycle_defaults,
            ..SynthSpec::default()
        };
        Ok(PreheatCycle(synth_cycle(&spec)?))
    })
}

/// Number of steps, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn preheat_cycle_steps(cycle: *const PreheatCycle) -> usize {
    cycle.as_ref().map_or(0, |c| c.0.steps())
}

/// Sample interval in seconds, or NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn preheat_cycle_dt(cycle: *const PreheatCycle) -> f64 {
    cycle.as_ref().map_or(f64::NAN, |c| c.0.dt())
}

#[no_mangle]
pub unsafe extern "C" fn preheat_cycle_free(cycle: *mut PreheatCycle) {
    free(cycle)
}

#[allow(clippy::too_many_arguments)]
unsafe fn step(
    config: *const PreheatConfig,
    cycle: *const PreheatCycle,
    state: PreheatState,
    p_hvch_batt_w: f64,
    k: usize,
    out_state: *mut PreheatState,
    out_breakdown: *mut PreheatBreakdown,
    backward: bool,
) -> PreheatStatus {
    run(|| {
        let cfg = get(config, "config")?;
        let cycle = get(cycle, "cycle")?;
        let out = get_mut(out_state, "out_state")?;
        let inputs = StepInputs {
            p_hvch_batt: p_hvch_batt_w,
            k,
        };
        let op = if backward {
            step_backward
        } else {
            step_forward
        };
        let (s, b) = op(&cfg.0.vehicle, state.into(), inputs, &cycle.0)?;
        *out = s.into();
        if let Some(ob) = out_breakdown.as_mut() {
            *ob = b.into();
        }
        Ok(())
    })
}

/// One forward step over cycle sample `k`. `out_breakdown` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn preheat_step_forward(
    config: *const PreheatConfig,
    cycle: *const PreheatCycle,
    state: PreheatState,
    p_hvch_batt_w: f64,
    k: usize,
    out_state: *mut PreheatState,
    out_breakdown: *mut PreheatBreakdown,
) -> PreheatStatus {
    step(
        config,
        cycle,
        state,
        p_hvch_batt_w,
        k,
        out_state,
        out_breakdown,
        false,
    )
}

/// One reverse step over cycle sample `k`, from the state after it.
#[no_mangle]
pub unsafe extern "C" fn preheat_step_backward(
    config: *const PreheatConfig,
    cycle: *const PreheatCycle,
    state_next: PreheatState,
    p_hvch_batt_w: f64,
    k: usize,
    out_state: *mut PreheatState,
    out_breakdown: *mut PreheatBreakdown,
) -> PreheatStatus {
    step(
        config,
        cycle,
        state_next,
        p_hvch_batt_w,
        k,
        out_state,
        out_breakdown,
        true,
    )
}

/// Sweep planner on the config's scenario. An unreachable target still
/// succeeds with `feasible == false` in the summary.
#[no_mangle]
pub unsafe extern "C" fn preheat_plan(
    config: *const PreheatConfig,
    cycle: *const PreheatCycle,
    out: *mut *mut PreheatPlan,
) -> PreheatStatus {
    produce(out, || {
        let cfg = get(config, "config")?;
        let cycle = get(cycle, "cycle")?;
        let s = cfg.0.scenario;
        let plan = plan_preheat(&cfg.0.vehicle, &cycle.0, s.initial(), s.targets())?;
        let summary = PreheatPlanSummary {
            splice_index: plan.splice_index,
            switch_time_s: plan.switch_time_s,
            feasible: plan.feasible,
            terminal: plan.trajectory.terminal().into(),
            energy: report(&plan.trajectory, &cfg.0, &cycle.0)?,
        };
        Ok(PreheatPlan {
            trajectory: plan.trajectory,
            summary,
        })
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_plan_summary(
    plan: *const PreheatPlan,
    out: *mut PreheatPlanSummary,
) -> PreheatStatus {
    run(|| {
        *get_mut(out, "out")? = get(plan, "plan")?.summary;
        Ok(())
    })
}

/// Copies up to `cap` states into `buf` (which may be NULL) and returns the
/// number of states, one more than the step count. Returns 0 for a NULL plan.
#[no_mangle]
pub unsafe extern "C" fn preheat_plan_states(
    plan: *const PreheatPlan,
    buf: *mut PreheatState,
    cap: usize,
) -> usize {
    plan.as_ref().map_or(0, |p| {
        copy_out(p.trajectory.states.iter().map(|&s| s.into()), buf, cap)
    })
}

/// Heater power to the battery per step, watts. Same buffer rules as the states.
#[no_mangle]
pub unsafe extern "C" fn preheat_plan_controls(
    plan: *const PreheatPlan,
    buf: *mut f64,
    cap: usize,
) -> usize {
    plan.as_ref().map_or(0, |p| {
        copy_out(p.trajectory.controls.iter().copied(), buf, cap)
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_plan_free(plan: *mut PreheatPlan) {
    free(plan)
}

/// Dynamic-programming reference solution on the config's scenario and grid.
#[no_mangle]
pub unsafe extern "C" fn preheat_dp_solve(
    config: *const PreheatConfig,
    cycle: *const PreheatCycle,
    out: *mut *mut PreheatDp,
) -> PreheatStatus {
    produce(out, || {
        let cfg = get(config, "config")?;
        let cycle = get(cycle, "cycle")?;
        let s = cfg.0.scenario;
        let dp: DpSolution =
            solve_dp(&cfg.0.vehicle, &cycle.0, s.initial(), s.targets(), cfg.0.dp)?;
        let summary = PreheatDpSummary {
            cost_wh: dp.cost_wh,
            predicted_cost_wh: dp.predicted_cost_wh,
            bellman_max_residual_wh: dp.bellman_max_residual_wh,
            best_effort_steps: dp.best_effort_steps,
            switch_index: dp.trajectory.switch_index(),
            terminal: dp.trajectory.terminal().into(),
            energy: report(&dp.trajectory, &cfg.0, &cycle.0)?,
        };
        Ok(PreheatDp {
            trajectory: dp.trajectory,
            summary,
        })
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_dp_summary(
    dp: *const PreheatDp,
    out: *mut PreheatDpSummary,
) -> PreheatStatus {
    run(|| {
        *get_mut(out, "out")? = get(dp, "dp")?.summary;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_dp_states(
    dp: *const PreheatDp,
    buf: *mut PreheatState,
    cap: usize,
) -> usize {
    dp.as_ref().map_or(0, |d| {
        copy_out(d.trajectory.states.iter().map(|&s| s.into()), buf, cap)
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_dp_controls(
    dp: *const PreheatDp,
    buf: *mut f64,
    cap: usize,
) -> usize {
    dp.as_ref().map_or(0, |d| {
        copy_out(d.trajectory.controls.iter().copied(), buf, cap)
    })
}

#[no_mangle]
pub unsafe extern "C" fn preheat_dp_free(dp: *mut PreheatDp) {
    free(dp)
}
