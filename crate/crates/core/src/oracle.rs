//! Dynamic-programming baseline for the preheat problem.
//!
//! Minimizes battery energy over the cycle on a uniform (soc, tb) grid with
//! a finite set of heater levels, using the same Euler step as the sweep
//! planner. Terminal targets are hard constraints.
//!
//! Feasibility is carried by a separate margin function instead of infinite
//! values in the cost table. The margin is the best achievable terminal
//! slack (kelvin, with soc slack scaled onto the temperature axis) and is
//! close to affine in the state, so interpolating it does not erode the
//! feasible set one cell per step the way interpolated infinities do. The
//! cost table stays finite at infeasible knots (cost of the best-margin
//! control) so it can be interpolated up to the boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::heuristic::{bang_schedule, plan_preheat, PreheatPlan, Targets};
use crate::model::{step_sample, DriveCycle, State, VehicleParams};
use crate::trajectory::{simulate, Origin, Trajectory};

const J_PER_WH: f64 = 3600.0;
/// Margin below zero still accepted as meeting the targets, kelvin.
const MARGIN_EPS: f64 = 1e-9;
/// Power-limit slack that counts as one kelvin of margin.
const WATTS_PER_MARGIN_K: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpGrid {
    pub n_soc: usize,
    pub n_tb: usize,
    pub n_u: usize,
    /// Terminal soc slack in grid cells.
    pub soc_slack_cells: f64,
    /// Terminal temperature slack in grid cells.
    pub tb_slack_cells: f64,
    /// Largest accepted relative gap between the value-function prediction
    /// and the simulated cost of the extracted trajectory.
    pub max_prediction_gap: f64,
    pub keep_snapshots: bool,
}

impl Default for DpGrid {
    fn default() -> Self {
        DpGrid {
            n_soc: 61,
            n_tb: 81,
            n_u: 5,
            soc_slack_cells: 0.5,
            tb_slack_cells: 0.0,
            max_prediction_gap: 0.005,
            keep_snapshots: false,
        }
    }
}

impl DpGrid {
    pub fn with_size(n_soc: usize, n_tb: usize, n_u: usize) -> Self {
        DpGrid {
            n_soc,
            n_tb,
            n_u,
            ..DpGrid::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_soc < 2 || self.n_tb < 2 || self.n_u < 2 {
            return Err(Error::Invalid(format!(
                "grid {}x{}x{} too small, every axis needs at least 2 points",
                self.n_soc, self.n_tb, self.n_u
            )));
        }
        if !(self.soc_slack_cells >= 0.0
            && self.tb_slack_cells >= 0.0
            && self.max_prediction_gap > 0.0)
        {
            return Err(Error::Invalid(
                "grid slacks must be non-negative and the gap threshold positive".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform axis over `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    step: f64,
    n: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, n: usize) -> Self {
        Axis {
            lo,
            step: (hi - lo) / (n - 1) as f64,
            n,
        }
    }

    fn knot(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let pos = ((x - self.lo) / self.step).clamp(0.0, (self.n - 1) as f64);
        let i = (pos.floor() as usize).min(self.n - 2);
        (i, pos - i as f64)
    }
}

/// Cost-to-go and feasibility margins on the grid at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSnapshot {
    pub step: usize,
    /// Row-major over (soc, tb): index `i * n_tb + j`. Joules.
    pub cost_j: Vec<f64>,
    /// Best reachable terminal temperature slack, kelvin.
    pub tb_margin_k: Vec<f64>,
    /// Best reachable terminal soc slack.
    pub soc_margin: Vec<f64>,
}

/// Signed slack against the terminal targets and the path constraints.
///
/// Temperature and soc are tracked separately, each maximized over its own
/// control. A single `min` of the two would put a kink in the function that
/// interpolation smears backwards over several cells, eroding the feasible
/// set; two separate near-affine functions interpolate cleanly. Requiring
/// both to be non-negative is a relaxation near the corner where the two
/// targets compete, which the terminal check on the extracted trajectory
/// catches.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Margin {
    tb: f64,
    soc: f64,
}

impl Margin {
    const NONE: Margin = Margin {
        tb: f64::NEG_INFINITY,
        soc: f64::NEG_INFINITY,
    };

    fn ok(self) -> bool {
        self.tb >= -MARGIN_EPS && self.soc >= -MARGIN_EPS
    }

    fn meet(self, o: Margin) -> Margin {
        Margin {
            tb: self.tb.min(o.tb),
            soc: self.soc.min(o.soc),
        }
    }

    fn join(self, o: Margin) -> Margin {
        Margin {
            tb: self.tb.max(o.tb),
            soc: self.soc.max(o.soc),
        }
    }

    /// Single figure for ranking moves that miss the targets, kelvin.
    fn worst(self, soc_scale: f64) -> f64 {
        self.tb.min(self.soc * soc_scale)
    }
}

struct Layer {
    cost: Vec<f64>,
    tb_margin: Vec<f64>,
    soc_margin: Vec<f64>,
}

/// Bilinear interpolation that ignores zero-weight corners, so an infinite
/// corner only matters when the query actually leans on it.
fn bilerp(table: &[f64], soc_ax: &Axis, tb_ax: &Axis, s: State) -> f64 {
    let (i, ws) = soc_ax.locate(s.soc);
    let (j, wt) = tb_ax.locate(s.tb);
    let nt = tb_ax.n;
    let corners = [
        ((1.0 - ws) * (1.0 - wt), i * nt + j),
        ((1.0 - ws) * wt, i * nt + j + 1),
        (ws * (1.0 - wt), (i + 1) * nt + j),
        (ws * wt, (i + 1) * nt + j + 1),
    ];
    let mut acc = 0.0;
    for (w, idx) in corners {
        if w > 0.0 {
            acc += w * table[idx];
        }
    }
    acc
}

struct Problem<'a> {
    params: &'a VehicleParams,
    cycle: &'a DriveCycle,
    targets: Targets,
    grid: DpGrid,
    soc_ax: Axis,
    tb_ax: Axis,
    /// Kelvin per unit soc, one cell to one cell.
    soc_scale: f64,
}

/// One candidate transition.
struct Move {
    u: f64,
    next: State,
    stage_j: f64,
    path: Margin,
}

struct Choice {
    mv: Move,
    total: f64,
    margin: Margin,
    reach: Margin,
}

impl<'a> Problem<'a> {
    fn new(
        params: &'a VehicleParams,
        cycle: &'a DriveCycle,
        targets: Targets,
        grid: DpGrid,
    ) -> Self {
        let soc_ax = Axis::new(params.soc_min, params.soc_max, grid.n_soc);
        let tb_ax = Axis::new(params.tb_min_c, params.tb_max_c, grid.n_tb);
        Problem {
            params,
            cycle,
            targets,
            grid,
            soc_ax,
            tb_ax,
            soc_scale: tb_ax.step / soc_ax.step,
        }
    }

    fn levels(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let head = self.cycle.hvch_headroom(self.params, k);
        let n = self.grid.n_u;
        (0..n).map(move |l| {
            if l + 1 == n {
                head
            } else {
                head * l as f64 / (n - 1) as f64
            }
        })
    }

    /// Transition from `s` under `u` with its path slack. Power-limit and
    /// temperature-bound slack count against the temperature margin, soc
    /// bounds against the soc margin. `None` only when the step itself fails.
    fn transition(&self, s: State, u: f64, k: usize) -> Option<Move> {
        let p = self.params;
        let (next, b) = step_sample(p, s, u, self.cycle.sample(k), self.cycle.dt()).ok()?;
        let (chg, dchg) = p.power_limits(s);
        let power = (dchg - b.p_battery).min(b.p_battery - chg) / WATTS_PER_MARGIN_K;
        let tb = (next.tb - p.tb_min_c).min(p.tb_max_c - next.tb);
        let soc = (next.soc - p.soc_min).min(p.soc_max - next.soc);
        Some(Move {
            u,
            next,
            stage_j: self.cycle.dt() * b.p_battery,
            path: Margin {
                tb: power.min(tb),
                soc,
            },
        })
    }

    /// Joules per kelvin charged at the terminal for missing the
    /// temperature target: the electrical cost of that heat.
    ///
    /// Only infeasible knots carry this price, and feasibility is decided by
    /// the margins alone. Without it the cost surface goes flat past the
    /// feasibility boundary, and interpolating across that concave kink
    /// biases the value low along trajectories that ride the boundary. Cost
    /// is nearly flat in soc on both sides of its boundary, so soc needs no
    /// price.
    fn tb_deficit_price(&self) -> f64 {
        self.params.thermal_capacitance / self.params.eta_hvch
    }

    fn terminal_layer(&self) -> Layer {
        let n = self.soc_ax.n * self.tb_ax.n;
        let mut tb_margin = Vec::with_capacity(n);
        let mut soc_margin = Vec::with_capacity(n);
        let tb_slack = self.grid.tb_slack_cells * self.tb_ax.step;
        let soc_slack = self.grid.soc_slack_cells * self.soc_ax.step;
        let mut cost = Vec::with_capacity(n);
        let price = self.tb_deficit_price();
        for i in 0..self.soc_ax.n {
            for j in 0..self.tb_ax.n {
                let m = Margin {
                    tb: self.tb_ax.knot(j) - self.targets.tb + tb_slack,
                    soc: self.soc_ax.knot(i) - self.targets.soc + soc_slack,
                };
                tb_margin.push(m.tb);
                soc_margin.push(m.soc);
                cost.push(price * (-m.tb).max(0.0));
            }
        }
        Layer {
            cost,
            tb_margin,
            soc_margin,
        }
    }

    fn lookup(&self, layer: &Layer, s: State) -> (f64, Margin) {
        let at = |t: &[f64]| bilerp(t, &self.soc_ax, &self.tb_ax, s);
        (
            at(&layer.cost),
            Margin {
                tb: at(&layer.tb_margin),
                soc: at(&layer.soc_margin),
            },
        )
    }

    /// Best move from `s` at step `k` against the next layer: the cheapest
    /// move meeting the targets, or the best-margin one if none does. `reach`
    /// holds the largest margins over all moves.
    fn choose(&self, s: State, k: usize, next: &Layer) -> Option<Choice> {
        let mut cheapest: Option<Choice> = None;
        let mut widest: Option<Choice> = None;
        let mut reach = Margin::NONE;
        for u in self.levels(k) {
            let Some(mv) = self.transition(s, u, k) else {
                continue;
            };
            let (v, m) = self.lookup(next, mv.next);
            let m = m.meet(mv.path);
            reach = reach.join(m);
            let c = Choice {
                total: mv.stage_j + v,
                margin: m,
                reach: m,
                mv,
            };
            if m.ok() {
                if cheapest.as_ref().is_none_or(|b| c.total < b.total) {
                    cheapest = Some(c);
                }
            } else if widest
                .as_ref()
                .is_none_or(|b| m.worst(self.soc_scale) > b.margin.worst(self.soc_scale))
            {
                widest = Some(c);
            }
        }
        cheapest.or(widest).map(|c| Choice { reach, ..c })
    }

    fn layer_at(&self, k: usize, next: &Layer) -> Layer {
        let nt = self.tb_ax.n;
        let cells: Vec<(f64, Margin)> = (0..self.soc_ax.n * nt)
            .into_par_iter()
            .map(|idx| {
                let s = State::new(self.soc_ax.knot(idx / nt), self.tb_ax.knot(idx % nt));
                match self.choose(s, k, next) {
                    Some(c) => (c.total, c.reach),
                    None => (f64::INFINITY, Margin::NONE),
                }
            })
            .collect();
        Layer {
            cost: cells.iter().map(|c| c.0).collect(),
            tb_margin: cells.iter().map(|c| c.1.tb).collect(),
            soc_margin: cells.iter().map(|c| c.1.soc).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    /// Simulated battery energy of the extracted trajectory.
    pub cost_wh: f64,
    /// Value-function prediction at the initial state.
    pub predicted_cost_wh: f64,
    pub trajectory: Trajectory,
    /// Worst `|V_k(x_k) - stage_k - V_{k+1}(x_{k+1})|` along the trajectory.
    pub bellman_max_residual_wh: f64,
    /// Steps where no control met the targets and the best-margin one was used.
    pub best_effort_steps: usize,
    pub grid: DpGrid,
    pub snapshots: Option<Vec<ValueSnapshot>>,
}

pub fn solve_dp(
    params: &VehicleParams,
    cycle: &DriveCycle,
    initial: State,
    targets: Targets,
    grid: DpGrid,
) -> Result<DpSolution> {
    grid.validate()?;
    cycle.check_against(params)?;
    if !params.in_bounds(initial) {
        return Err(Error::Invalid(format!(
            "initial state soc={} tb={} outside the grid",
            initial.soc, initial.tb
        )));
    }
    let problem = Problem::new(params, cycle, targets, grid);
    let n = cycle.steps();

    let mut layers = Vec::with_capacity(n + 1);
    layers.push(problem.terminal_layer());
    for k in (0..n).rev() {
        let next = layers.last().expect("terminal layer present");
        let layer = problem.layer_at(k, next);
        layers.push(layer);
    }
    layers.reverse();

    let (predicted, m0) = problem.lookup(&layers[0], initial);
    if !m0.ok() {
        if let Some(w) = bang_witness(params, cycle, initial, targets) {
            return Err(Error::GridTooCoarse(format!(
                "grid marks the targets unreachable (margins {:.3} K, {:.4} soc) but heating from step {w} reaches them",
                m0.tb, m0.soc
            )));
        }
        return Err(Error::InfeasibleProblem(format!(
            "targets tb>={} soc>={} unreachable from soc={} tb={} (margins {:.3} K, {:.4} soc)",
            targets.tb, targets.soc, initial.soc, initial.tb, m0.tb, m0.soc
        )));
    }

    let mut states = vec![initial];
    let mut controls = Vec::with_capacity(n);
    let mut breakdowns = Vec::with_capacity(n);
    let mut best_effort_steps = 0;
    let mut bellman = 0.0f64;
    let mut s = initial;
    for k in 0..n {
        let c = problem.choose(s, k, &layers[k + 1]).ok_or_else(|| {
            Error::InfeasibleProblem(format!("no admissible heater level at step {k}"))
        })?;
        if !c.margin.ok() {
            best_effort_steps += 1;
        }
        let (v_here, _) = problem.lookup(&layers[k], s);
        bellman = bellman.max((v_here - c.total).abs());
        let u = c.mv.u;
        let (next, b) =
            step_sample(params, s, u, cycle.sample(k), cycle.dt()).map_err(|e| e.at_step(k))?;
        controls.push(u);
        breakdowns.push(b);
        states.push(next);
        s = next;
    }
    let trajectory = Trajectory {
        origin: Origin::Oracle,
        dt: cycle.dt(),
        offset: 0,
        states,
        controls,
        breakdowns,
    };
    let cost_j: f64 = trajectory
        .breakdowns
        .iter()
        .map(|b| b.p_battery)
        .sum::<f64>()
        * cycle.dt();

    let end = trajectory.terminal();
    let tb_tol = 0.5 * problem.tb_ax.step;
    let soc_tol = 0.5 * problem.soc_ax.step;
    if end.tb < targets.tb - tb_tol || end.soc < targets.soc - soc_tol {
        return Err(Error::GridTooCoarse(format!(
            "extracted trajectory ends at soc={:.4} tb={:.2} C, outside targets by more than half a cell",
            end.soc, end.tb
        )));
    }
    let gap = (predicted - cost_j).abs() / cost_j.abs().max(1.0);
    if gap > grid.max_prediction_gap {
        return Err(Error::GridTooCoarse(format!(
            "value prediction {:.1} Wh differs from extracted cost {:.1} Wh by {:.3}%",
            predicted / J_PER_WH,
            cost_j / J_PER_WH,
            100.0 * gap
        )));
    }

    let snapshots = grid.keep_snapshots.then(|| {
        layers
            .into_iter()
            .enumerate()
            .map(|(step, l)| ValueSnapshot {
                step,
                cost_j: l.cost,
                tb_margin_k: l.tb_margin,
                soc_margin: l.soc_margin,
            })
            .collect()
    });

    Ok(DpSolution {
        cost_wh: cost_j / J_PER_WH,
        predicted_cost_wh: predicted / J_PER_WH,
        trajectory,
        bellman_max_residual_wh: bellman / J_PER_WH,
        best_effort_steps,
        grid,
        snapshots,
    })
}

/// First switch index whose off-then-max schedule meets the targets without
/// breaking a path constraint.
fn bang_witness(
    params: &VehicleParams,
    cycle: &DriveCycle,
    initial: State,
    targets: Targets,
) -> Option<usize> {
    (0..=cycle.steps()).find(|&w| {
        simulate(
            params,
            cycle,
            initial,
            &bang_schedule(params, cycle, w),
            Origin::Oracle,
        )
        .is_ok_and(|t| {
            let end = t.terminal();
            end.tb >= targets.tb
                && end.soc >= targets.soc
                && t.limit_violations().is_empty()
                && t.states.iter().all(|&s| params.in_bounds(s))
        })
    })
}

/// Shape of a heater schedule: off, then a single switch to full headroom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangOff {
    /// First step with the heater on (`N` if never).
    pub switch_index: usize,
    /// Level of the switching step when it is a partial one.
    pub transition_level_w: Option<f64>,
}

/// Classify `controls` as off-then-max. A single partial step at the
/// switch is allowed since a finite step cannot land exactly on the switch
/// instant. Returns `None` for any other shape.
pub fn bang_off_structure(
    params: &VehicleParams,
    cycle: &DriveCycle,
    controls: &[f64],
    tol_w: f64,
) -> Option<BangOff> {
    let n = controls.len();
    let s = controls.iter().position(|&u| u > tol_w).unwrap_or(n);
    if s == n {
        return Some(BangOff {
            switch_index: n,
            transition_level_w: None,
        });
    }
    let at_max = |k: usize| (controls[k] - cycle.hvch_headroom(params, k)).abs() <= tol_w;
    if !(s + 1..n).all(at_max) {
        return None;
    }
    Some(BangOff {
        switch_index: s,
        transition_level_w: (!at_max(s)).then_some(controls[s]),
    })
}

/// Energy and timing differences between the sweep planner and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub heuristic: EnergyReport,
    pub oracle: EnergyReport,
    /// `heuristic - oracle`, per component.
    pub delta: EnergyReport,
    pub total_delta_wh: f64,
    pub total_delta_rel: f64,
    pub heuristic_switch_index: usize,
    pub oracle_switch_index: usize,
    /// `heuristic - oracle`, in samples.
    pub switch_delta_samples: i64,
    pub switch_delta_s: f64,
    pub max_tb_deviation_k: f64,
}

impl std::fmt::Display for GapReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<20} {:>12} {:>12} {:>10}",
            "Eng. component", "Heuristic", "DP", "Delta"
        )?;
        for (((label, h), (_, o)), (_, d)) in self
            .heuristic
            .rows()
            .into_iter()
            .zip(self.oracle.rows())
            .zip(self.delta.rows())
        {
            writeln!(f, "{label:<20} {h:>12.1} {o:>12.1} {d:>10.1}")?;
        }
        writeln!(
            f,
            "gap {:+.3}%, switch at step {} vs {} ({:+} samples, {:+.0} s)",
            100.0 * self.total_delta_rel,
            self.heuristic_switch_index,
            self.oracle_switch_index,
            self.switch_delta_samples,
            self.switch_delta_s
        )
    }
}

impl GapReport {
    pub fn between(
        params: &VehicleParams,
        cycle: &DriveCycle,
        heuristic: &Trajectory,
        oracle: &Trajectory,
    ) -> Result<GapReport> {
        let h = energy_report(heuristic, params, cycle)?;
        let o = energy_report(oracle, params, cycle)?;
        let delta = h.map2(&o, |a, b| a - b);
        let hs = heuristic.switch_index();
        let os = oracle.switch_index();
        let switch_delta_samples = hs as i64 - os as i64;
        let max_tb_deviation_k = heuristic
            .states
            .iter()
            .zip(&oracle.states)
            .map(|(a, b)| (a.tb - b.tb).abs())
            .fold(0.0, f64::max);
        Ok(GapReport {
            heuristic: h,
            oracle: o,
            delta,
            total_delta_wh: delta.total_battery_wh,
            total_delta_rel: delta.total_battery_wh
                / o.total_battery_wh.abs().max(f64::MIN_POSITIVE),
            heuristic_switch_index: hs,
            oracle_switch_index: os,
            switch_delta_samples,
            switch_delta_s: switch_delta_samples as f64 * cycle.dt(),
            max_tb_deviation_k,
        })
    }
}

pub struct Comparison {
    pub plan: PreheatPlan,
    pub dp: DpSolution,
    pub gap: GapReport,
}

/// Run both planners on the same problem and measure the gap.
pub fn compare(
    params: &VehicleParams,
    cycle: &DriveCycle,
    initial: State,
    targets: Targets,
    grid: DpGrid,
) -> Result<Comparison> {
    let plan = plan_preheat(params, cycle, initial, targets)?;
    let dp = solve_dp(params, cycle, initial, targets, grid)?;
    let gap = GapReport::between(params, cycle, &plan.trajectory, &dp.trajectory)?;
    Ok(Comparison { plan, dp, gap })
}
