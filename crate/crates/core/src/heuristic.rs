//! Forward/backward sweep preheat planner.
//!
//! The forward sweep rolls the cycle out with the battery heater off. The
//! backward sweep starts from the arrival target and runs the reverted
//! dynamics with the heater at its maximum available power. The first
//! sample (scanning back from arrival) where the backward temperature drops
//! to or below the forward one fixes the switch-on instant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{step_back_sample, DriveCycle, State, VehicleParams};
use crate::trajectory::{simulate, Origin, Trajectory};

/// Arrival targets: minimum battery temperature and state of charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub soc: f64,
    pub tb: f64,
}

/// Tolerance below the target temperature still counted as reaching it.
pub const TERMINAL_TB_TOLERANCE_K: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardSweep {
    /// States `crossing..=N` at offset `crossing`.
    pub trajectory: Trajectory,
    pub crossing: usize,
    /// `tb_fw(crossing) - tb_bk(crossing)`, non-negative.
    pub margin_k: f64,
    /// Whether `tb_bk - tb_fw` shrank monotonically along the sweep.
    pub monotone: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub limit_violations: Vec<usize>,
    pub crossing_margin_k: f64,
    pub monotone_crossing: bool,
    pub no_crossing: bool,
    pub terminal_soc: f64,
    pub terminal_tb: f64,
    pub soc_target_met: bool,
    pub soc_in_bounds: bool,
    /// Backward-sweep soc at the splice minus the forward soc there.
    pub splice_soc_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreheatPlan {
    /// Step index at which the heater switches on (0-based, `N` = never).
    pub splice_index: usize,
    /// Length of the heating window ending at arrival, seconds.
    pub switch_time_s: f64,
    pub feasible: bool,
    pub trajectory: Trajectory,
    pub diagnostics: PlanDiagnostics,
    pub forward: Trajectory,
    pub backward: Option<Trajectory>,
}

impl PreheatPlan {
    pub fn heating_steps(&self) -> usize {
        self.trajectory.steps() - self.splice_index
    }
}

fn check_initial(params: &VehicleParams, initial: State) -> Result<()> {
    if !params.in_bounds(initial) {
        return Err(Error::Invalid(format!(
            "initial state soc={} tb={} outside bounds",
            initial.soc, initial.tb
        )));
    }
    Ok(())
}

/// Roll the cycle out with the battery heater off.
pub fn forward_rollout(
    params: &VehicleParams,
    cycle: &DriveCycle,
    initial: State,
) -> Result<Trajectory> {
    check_initial(params, initial)?;
    let zeros = vec![0.0; cycle.steps()];
    simulate(params, cycle, initial, &zeros, Origin::Forward)
}

/// Heater schedule that is off before `switch` and at full headroom after.
pub fn bang_schedule(params: &VehicleParams, cycle: &DriveCycle, switch: usize) -> Vec<f64> {
    (0..cycle.steps())
        .map(|k| {
            if k < switch {
                0.0
            } else {
                cycle.hvch_headroom(params, k)
            }
        })
        .collect()
}

/// Reverse sweep from `terminal` at maximum heating until it meets `forward`.
pub fn backward_rollout(
    params: &VehicleParams,
    cycle: &DriveCycle,
    terminal: State,
    forward: &Trajectory,
) -> Result<BackwardSweep> {
    forward.check_spans(cycle)?;
    let n = cycle.steps();
    let fw = &forward.states;

    let mut states = vec![terminal];
    let mut controls = Vec::new();
    let mut breakdowns = Vec::new();
    let mut monotone = true;
    let mut prev_gap = terminal.tb - fw[n].tb;
    let mut k = n;
    let mut s = terminal;
    while s.tb > fw[k].tb {
        if k == 0 {
            return Err(Error::NoCrossing {
                margin_k: s.tb - fw[0].tb,
            });
        }
        k -= 1;
        let u = cycle.hvch_headroom(params, k);
        let (prev, b) = step_back_sample(params, s, u, cycle.sample(k), cycle.dt())
            .map_err(|e| e.at_step(k))?;
        let gap = prev.tb - fw[k].tb;
        if gap > prev_gap {
            monotone = false;
        }
        prev_gap = gap;
        states.push(prev);
        controls.push(u);
        breakdowns.push(b);
        s = prev;
    }
    states.reverse();
    controls.reverse();
    breakdowns.reverse();

    Ok(BackwardSweep {
        trajectory: Trajectory {
            origin: Origin::Backward,
            dt: cycle.dt(),
            offset: k,
            states,
            controls,
            breakdowns,
        },
        crossing: k,
        margin_k: fw[k].tb - s.tb,
        monotone,
    })
}

fn check_targets(params: &VehicleParams, targets: Targets) -> Result<()> {
    let t = State::new(targets.soc, targets.tb);
    if !params.in_bounds(t) {
        return Err(Error::Invalid(format!(
            "targets soc={} tb={} outside bounds",
            targets.soc, targets.tb
        )));
    }
    Ok(())
}

/// Compute the preheat plan: forward sweep, backward sweep, splice at the
/// crossing, then re-simulate the spliced schedule forward so the reported
/// trajectory is dynamically consistent.
pub fn plan_preheat(
    params: &VehicleParams,
    cycle: &DriveCycle,
    initial: State,
    targets: Targets,
) -> Result<PreheatPlan> {
    check_targets(params, targets)?;
    let forward = forward_rollout(params, cycle, initial)?;
    let terminal = State::new(targets.soc, targets.tb);

    let (splice, backward, margin, monotone, no_crossing) =
        match backward_rollout(params, cycle, terminal, &forward) {
            Ok(sweep) => (
                sweep.crossing,
                Some(sweep.trajectory),
                sweep.margin_k,
                sweep.monotone,
                false,
            ),
            // best effort: heat from the first step
            Err(Error::NoCrossing { margin_k }) => (0, None, -margin_k, true, true),
            Err(e) => return Err(e),
        };

    let schedule = bang_schedule(params, cycle, splice);
    let trajectory = simulate(params, cycle, initial, &schedule, Origin::Spliced)?;

    let end = trajectory.terminal();
    let soc_in_bounds = trajectory
        .states
        .iter()
        .all(|s| s.soc >= params.soc_min && s.soc <= params.soc_max);
    let feasible = !no_crossing && end.tb >= targets.tb - TERMINAL_TB_TOLERANCE_K && soc_in_bounds;
    let splice_soc_mismatch = backward
        .as_ref()
        .map(|b| b.states[0].soc - forward.states[splice].soc)
        .unwrap_or(0.0);

    let diagnostics = PlanDiagnostics {
        limit_violations: trajectory.limit_violations(),
        crossing_margin_k: margin,
        monotone_crossing: monotone,
        no_crossing,
        terminal_soc: end.soc,
        terminal_tb: end.tb,
        soc_target_met: end.soc >= targets.soc,
        soc_in_bounds,
        splice_soc_mismatch,
    };
    if !diagnostics.monotone_crossing {
        log::warn!("temperature gap along the backward sweep is not monotone");
    }
    if !diagnostics.limit_violations.is_empty() {
        log::warn!(
            "battery power limits violated at {} steps",
            diagnostics.limit_violations.len()
        );
    }

    Ok(PreheatPlan {
        splice_index: splice,
        switch_time_s: (cycle.steps() - splice) as f64 * cycle.dt(),
        feasible,
        trajectory,
        diagnostics,
        forward,
        backward,
    })
}
