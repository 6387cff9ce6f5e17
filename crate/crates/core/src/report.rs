//! Output files of a run: manifest, per-step CSVs and JSON summaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accounting::{energy_report, verify_balances, BalanceReport, EnergyReport};
use crate::config::Config;
use crate::cycle_io::SynthSpec;
use crate::error::{Error, Result};
use crate::heuristic::{PlanDiagnostics, PreheatPlan};
use crate::model::{DriveCycle, VehicleParams};
use crate::oracle::{DpGrid, DpSolution};
use crate::trajectory::Trajectory;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleSource {
    File(PathBuf),
    Synth(SynthSpec),
}

/// Everything needed to rerun a command and get the same files.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config_path: Option<PathBuf>,
    /// Configuration after defaults and command-line overrides.
    pub config: Config,
    pub cycle: CycleSource,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub seed: Option<u64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Integrity(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Integrity(format!("{}: {other:?}", path.display())),
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    step: usize,
    time_s: f64,
    soc: f64,
    tb_c: f64,
    p_hvch_batt_w: Option<f64>,
    p_terminal_w: Option<f64>,
    p_battery_w: Option<f64>,
    current_a: Option<f64>,
    q_joule_w: Option<f64>,
    q_ed_w: Option<f64>,
    q_leak_w: Option<f64>,
    limit_violation: Option<bool>,
}

/// One row per state. The interval columns are empty on the arrival row.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, s) in traj.states.iter().enumerate() {
        let b = traj.breakdowns.get(i);
        let row = TrajectoryRow {
            step: traj.offset + i,
            time_s: (traj.offset + i) as f64 * traj.dt,
            soc: s.soc,
            tb_c: s.tb,
            p_hvch_batt_w: traj.controls.get(i).copied(),
            p_terminal_w: b.map(|b| b.p_terminal),
            p_battery_w: b.map(|b| b.p_battery),
            current_a: b.map(|b| b.current),
            q_joule_w: b.map(|b| b.q_joule),
            q_ed_w: b.map(|b| b.q_ed),
            q_leak_w: b.map(|b| b.q_leak),
            limit_violation: b.map(|b| b.limit_violation),
        };
        w.serialize(row)
            .map_err(|e| csv_err(Path::new("<trajectory>"), e))?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))
}

pub fn save_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory_csv(traj, std::io::BufWriter::new(f))
}

/// Per-step side-by-side view of two trajectories over the same cycle,
/// with cumulative battery energy.
pub fn write_comparison_csv<W: Write>(
    a: (&str, &Trajectory),
    b: (&str, &Trajectory),
    writer: W,
) -> Result<()> {
    let (na, ta) = a;
    let (nb, tb) = b;
    if ta.states.len() != tb.states.len() || ta.offset != tb.offset || ta.dt != tb.dt {
        return Err(Error::Integrity(
            "trajectories do not cover the same steps".into(),
        ));
    }
    const FIELDS: [&str; 9] = [
        "soc",
        "tb_c",
        "p_hvch_batt_w",
        "q_joule_w",
        "q_ed_w",
        "q_leak_w",
        "p_battery_w",
        "energy_wh",
        "limit_violation",
    ];
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["step".to_string(), "time_s".to_string()];
    for n in [na, nb] {
        header.extend(FIELDS.iter().map(|f| format!("{n}_{f}")));
    }
    let err = |e| csv_err(Path::new("<comparison>"), e);
    w.write_record(&header).map_err(err)?;

    let mut energy = [0.0f64; 2];
    for i in 0..ta.states.len() {
        let mut rec = vec![
            (ta.offset + i).to_string(),
            ((ta.offset + i) as f64 * ta.dt).to_string(),
        ];
        for (slot, t) in [ta, tb].into_iter().enumerate() {
            let s = t.states[i];
            rec.push(s.soc.to_string());
            rec.push(s.tb.to_string());
            let cell = |v: Option<String>| v.unwrap_or_default();
            let bd = t.breakdowns.get(i);
            rec.push(cell(t.controls.get(i).map(|u| u.to_string())));
            rec.push(cell(bd.map(|b| b.q_joule.to_string())));
            rec.push(cell(bd.map(|b| b.q_ed.to_string())));
            rec.push(cell(bd.map(|b| b.q_leak.to_string())));
            rec.push(cell(bd.map(|b| b.p_battery.to_string())));
            rec.push((energy[slot] / 3600.0).to_string());
            rec.push(cell(bd.map(|b| b.limit_violation.to_string())));
            if let Some(b) = bd {
                energy[slot] += b.p_battery * t.dt;
            }
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<comparison>", e))
}

pub fn save_comparison_csv(
    a: (&str, &Trajectory),
    b: (&str, &Trajectory),
    path: &Path,
) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_comparison_csv(a, b, std::io::BufWriter::new(f))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    pub energy: EnergyReport,
    pub balances: BalanceReport,
}

impl EnergySummary {
    pub fn of(traj: &Trajectory, params: &VehicleParams, cycle: &DriveCycle) -> Result<Self> {
        Ok(EnergySummary {
            energy: energy_report(traj, params, cycle)?,
            balances: verify_balances(traj, params, cycle)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanSummary {
    pub splice_index: usize,
    pub switch_time_s: f64,
    pub feasible: bool,
    pub diagnostics: PlanDiagnostics,
    #[serde(flatten)]
    pub energy: EnergySummary,
}

impl PlanSummary {
    pub fn of(plan: &PreheatPlan, params: &VehicleParams, cycle: &DriveCycle) -> Result<Self> {
        Ok(PlanSummary {
            splice_index: plan.splice_index,
            switch_time_s: plan.switch_time_s,
            feasible: plan.feasible,
            diagnostics: plan.diagnostics.clone(),
            energy: EnergySummary::of(&plan.trajectory, params, cycle)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DpSummary {
    pub cost_wh: f64,
    pub predicted_cost_wh: f64,
    pub bellman_max_residual_wh: f64,
    pub best_effort_steps: usize,
    pub switch_index: usize,
    pub grid: DpGrid,
    #[serde(flatten)]
    pub energy: EnergySummary,
}

impl DpSummary {
    pub fn of(dp: &DpSolution, params: &VehicleParams, cycle: &DriveCycle) -> Result<Self> {
        Ok(DpSummary {
            cost_wh: dp.cost_wh,
            predicted_cost_wh: dp.predicted_cost_wh,
            bellman_max_residual_wh: dp.bellman_max_residual_wh,
            best_effort_steps: dp.best_effort_steps,
            switch_index: dp.trajectory.switch_index(),
            grid: dp.grid,
            energy: EnergySummary::of(&dp.trajectory, params, cycle)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle_io::synth_cycle;
    use crate::heuristic::{forward_rollout, plan_preheat, Targets};
    use crate::model::{defaults, State};

    #[test]
    fn trajectory_csv_has_one_row_per_state() {
        let p = defaults::vehicle_params();
        let c = synth_cycle(&SynthSpec::default()).unwrap();
        let t = forward_rollout(&p, &c, State::new(0.9, -7.0)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), t.states.len() + 1);
        assert!(lines[0].starts_with("step,time_s,soc,tb_c,p_hvch_batt_w"));
        assert!(lines.last().unwrap().ends_with(",,,,,,,,"));
    }

    #[test]
    fn comparison_csv_accumulates_energy() {
        let p = defaults::vehicle_params();
        let c = synth_cycle(&SynthSpec::default()).unwrap();
        let plan = plan_preheat(
            &p,
            &c,
            State::new(0.9, -7.0),
            Targets { soc: 0.6, tb: 25.0 },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_comparison_csv(
            ("heuristic", &plan.trajectory),
            ("forward", &plan.forward),
            &mut buf,
        )
        .unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let h = rdr.headers().unwrap().clone();
        let col = h.iter().position(|x| x == "heuristic_energy_wh").unwrap();
        let last = rdr.records().last().unwrap().unwrap();
        let total = energy_report(&plan.trajectory, &p, &c)
            .unwrap()
            .total_battery_wh;
        let got: f64 = last[col].parse().unwrap();
        assert!((got - total).abs() < 1e-6 * total);
    }
}
