//! Energy decomposition of a trajectory and integrated balance checks.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{DriveCycle, VehicleParams};
use crate::trajectory::Trajectory;

const J_PER_WH: f64 = 3600.0;

/// Energy per component over a trajectory, watt-hours.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub joule_heating_wh: f64,
    pub ed_heating_wh: f64,
    pub hvch_battery_heating_wh: f64,
    /// Heat exchanged with ambient, negative when the battery loses heat.
    pub ambient_leakage_wh: f64,
    pub hvch_cabin_wh: f64,
    pub aux_wh: f64,
    pub prop_wh: f64,
    pub total_battery_wh: f64,
}

impl EnergyReport {
    /// Rows as `(label, value)`: the heat terms and total first, then the loads.
    pub fn rows(&self) -> [(&'static str, f64); 8] {
        [
            ("Joule heating", self.joule_heating_wh),
            ("ED heating", self.ed_heating_wh),
            ("HVCH bat. heating", self.hvch_battery_heating_wh),
            ("Ambient leakage", self.ambient_leakage_wh),
            ("Total bat. eng.", self.total_battery_wh),
            ("HVCH cabin heating", self.hvch_cabin_wh),
            ("Auxiliary load", self.aux_wh),
            ("Propulsion", self.prop_wh),
        ]
    }

    /// `total - (joule + hvch battery + hvch cabin + aux + prop)`.
    pub fn identity_residual(&self) -> f64 {
        self.total_battery_wh
            - (self.joule_heating_wh
                + self.hvch_battery_heating_wh
                + self.hvch_cabin_wh
                + self.aux_wh
                + self.prop_wh)
    }

    pub fn map2(&self, other: &EnergyReport, f: impl Fn(f64, f64) -> f64) -> EnergyReport {
        EnergyReport {
            joule_heating_wh: f(self.joule_heating_wh, other.joule_heating_wh),
            ed_heating_wh: f(self.ed_heating_wh, other.ed_heating_wh),
            hvch_battery_heating_wh: f(self.hvch_battery_heating_wh, other.hvch_battery_heating_wh),
            ambient_leakage_wh: f(self.ambient_leakage_wh, other.ambient_leakage_wh),
            hvch_cabin_wh: f(self.hvch_cabin_wh, other.hvch_cabin_wh),
            aux_wh: f(self.aux_wh, other.aux_wh),
            prop_wh: f(self.prop_wh, other.prop_wh),
            total_battery_wh: f(self.total_battery_wh, other.total_battery_wh),
        }
    }
}

impl Add for EnergyReport {
    type Output = EnergyReport;
    fn add(self, rhs: EnergyReport) -> EnergyReport {
        self.map2(&rhs, |a, b| a + b)
    }
}

impl fmt::Display for EnergyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>12}", "Eng. component", "Energy [Wh]")?;
        for (label, v) in self.rows() {
            writeln!(f, "{label:<20} {v:>12.1}")?;
        }
        Ok(())
    }
}

/// Left-endpoint sums of the per-step power flows, matching the Euler step.
/// The trajectory is read against `cycle` at its own offset.
pub fn energy_report(
    trajectory: &Trajectory,
    _params: &VehicleParams,
    cycle: &DriveCycle,
) -> Result<EnergyReport> {
    trajectory.check_within(cycle)?;
    let mut j = [0.0f64; 8];
    for (k, (b, &u)) in trajectory
        .breakdowns
        .iter()
        .zip(&trajectory.controls)
        .enumerate()
    {
        let s = cycle.sample(trajectory.offset + k);
        j[0] += b.q_joule;
        j[1] += b.q_ed;
        j[2] += u;
        j[3] += b.q_leak;
        j[4] += s.p_hvch_cabin_w;
        j[5] += s.p_aux_w;
        j[6] += s.p_prop_w;
        j[7] += b.p_battery;
    }
    let wh = |x: f64| x * trajectory.dt / J_PER_WH;
    Ok(EnergyReport {
        joule_heating_wh: wh(j[0]),
        ed_heating_wh: wh(j[1]),
        hvch_battery_heating_wh: wh(j[2]),
        ambient_leakage_wh: wh(j[3]),
        hvch_cabin_wh: wh(j[4]),
        aux_wh: wh(j[5]),
        prop_wh: wh(j[6]),
        total_battery_wh: wh(j[7]),
    })
}

/// Residuals of the integrated electrical and thermal balances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// `sum P_b - sum(Q_joule + P_hvch_b + P_hvch_c + P_aux + P_prop)`, joules.
    pub electrical_abs_j: f64,
    pub electrical_rel: f64,
    /// `C (tb_N - tb_0) - dt * sum(net heat)`, joules.
    pub thermal_abs_j: f64,
    pub thermal_rel: f64,
    /// Worst single-step thermal residual, joules.
    pub thermal_step_max_j: f64,
}

impl BalanceReport {
    pub fn closes(&self, rel_tol: f64) -> bool {
        self.electrical_rel <= rel_tol && self.thermal_rel <= rel_tol
    }
}

/// Integrated balance residuals. Heat terms are recomputed from the states
/// and cycle inputs, so a perturbed state shows up in the thermal residual.
pub fn verify_balances(
    trajectory: &Trajectory,
    params: &VehicleParams,
    cycle: &DriveCycle,
) -> Result<BalanceReport> {
    trajectory.check_within(cycle)?;
    let dt = trajectory.dt;
    let mut p_b = 0.0;
    let mut p_parts = 0.0;
    let mut p_scale = 0.0;
    let mut heat = 0.0;
    let mut heat_scale = 0.0;
    let mut step_max = 0.0f64;
    let c = params.thermal_capacitance;
    for (i, (b, &u)) in trajectory
        .breakdowns
        .iter()
        .zip(&trajectory.controls)
        .enumerate()
    {
        let s = cycle.sample(trajectory.offset + i);
        let tb = trajectory.states[i].tb;
        let parts = [b.q_joule, u, s.p_hvch_cabin_w, s.p_aux_w, s.p_prop_w];
        p_b += b.p_battery;
        p_parts += parts.iter().sum::<f64>();
        p_scale += parts.iter().map(|x| x.abs()).sum::<f64>();

        let terms = [
            params.eta_hvch * u,
            s.gamma_w_per_k * (s.t_amb_c - tb),
            b.q_joule,
            b.q_ed,
        ];
        let h: f64 = terms.iter().sum();
        heat += h;
        heat_scale += terms.iter().map(|x| x.abs()).sum::<f64>();
        let dtb = trajectory.states[i + 1].tb - tb;
        step_max = step_max.max((c * dtb - dt * h).abs());
    }
    let electrical_abs_j = dt * (p_b - p_parts);
    let rise = trajectory.terminal().tb - trajectory.initial().tb;
    let thermal_abs_j = c * rise - dt * heat;
    let rel = |abs: f64, scale: f64| {
        if scale > 0.0 {
            abs.abs() / scale
        } else {
            abs.abs()
        }
    };
    Ok(BalanceReport {
        electrical_abs_j,
        electrical_rel: rel(electrical_abs_j, dt * p_scale),
        thermal_abs_j,
        thermal_rel: rel(thermal_abs_j, dt * heat_scale),
        thermal_step_max_j: step_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle_io::{synth_cycle, SynthSpec};
    use crate::heuristic::{forward_rollout, plan_preheat, Targets};
    use crate::model::{defaults, CycleSample, State};
    use crate::trajectory::{simulate, Origin};

    fn preset() -> (VehicleParams, DriveCycle) {
        (
            defaults::vehicle_params(),
            synth_cycle(&SynthSpec::default()).unwrap(),
        )
    }

    #[test]
    fn constant_component_unit_conversion() {
        let p = defaults::vehicle_params();
        let s = CycleSample {
            speed_mps: 0.0,
            p_prop_w: 0.0,
            p_aux_w: 1000.0,
            p_hvch_cabin_w: 0.0,
            t_amb_c: 20.0,
            gamma_w_per_k: 0.0,
        };
        let c = DriveCycle::new(30.0, vec![s; 121]).unwrap();
        let t = simulate(
            &p,
            &c,
            State::new(0.8, 20.0),
            &vec![0.0; 120],
            Origin::Forward,
        )
        .unwrap();
        let r = energy_report(&t, &p, &c).unwrap();
        assert!((r.aux_wh - 1000.0).abs() < 1e-9);
        assert!(r.identity_residual().abs() < 1e-6 * r.total_battery_wh);
    }

    #[test]
    fn empty_trajectory_reports_zero() {
        let (p, c) = preset();
        let t = Trajectory {
            origin: Origin::Forward,
            dt: 30.0,
            offset: 0,
            states: vec![State::new(0.9, -7.0)],
            controls: vec![],
            breakdowns: vec![],
        };
        let b = verify_balances(&t, &p, &c).unwrap();
        assert_eq!(b.electrical_abs_j, 0.0);
        assert_eq!(b.thermal_abs_j, 0.0);
        assert_eq!(energy_report(&t, &p, &c).unwrap(), EnergyReport::default());
    }

    #[test]
    fn forward_rollout_balances_close() {
        let (p, c) = preset();
        let t = forward_rollout(&p, &c, State::new(0.9, -7.0)).unwrap();
        let b = verify_balances(&t, &p, &c).unwrap();
        assert!(b.closes(1e-9), "{b:?}");
    }

    #[test]
    fn injected_fault_is_detected() {
        let (p, c) = preset();
        let mut t = forward_rollout(&p, &c, State::new(0.9, -7.0)).unwrap();
        let n = t.steps();
        t.states[n].tb += 0.1;
        let b = verify_balances(&t, &p, &c).unwrap();
        let expected = p.thermal_capacitance * 0.1;
        assert!(
            (b.thermal_abs_j - expected).abs() < 1e-6 * expected,
            "{b:?}"
        );
        assert!(!b.closes(1e-9));
    }

    #[test]
    fn report_is_additive_over_splits() {
        let (p, c) = preset();
        let plan = plan_preheat(
            &p,
            &c,
            State::new(0.9, -7.0),
            Targets { soc: 0.6, tb: 25.0 },
        )
        .unwrap();
        let t = &plan.trajectory;
        let whole = energy_report(t, &p, &c).unwrap();
        for m in [1, 37, 90, t.steps() - 1] {
            let (a, b) = t.split_at(m).unwrap();
            let ra = energy_report(&a, &p, &c).unwrap();
            let rb = energy_report(&b, &p, &c.window(m, c.steps()).unwrap()).unwrap_err();
            assert!(matches!(rb, crate::Error::Integrity(_)));
            let rb = energy_report(&b, &p, &c).unwrap();
            let sum = ra + rb;
            for ((_, x), (_, y)) in sum.rows().iter().zip(whole.rows()) {
                assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn sign_conventions_on_cold_trip() {
        let (p, c) = preset();
        let plan = plan_preheat(
            &p,
            &c,
            State::new(0.9, -7.0),
            Targets { soc: 0.6, tb: 25.0 },
        )
        .unwrap();
        let r = energy_report(&plan.trajectory, &p, &c).unwrap();
        assert!(r.ed_heating_wh >= 0.0);
        assert!(r.hvch_battery_heating_wh >= 0.0);
        assert!(r.hvch_cabin_wh >= 0.0);
        assert!(r.ambient_leakage_wh <= 0.0);
        assert!(r.identity_residual().abs() <= 1e-6 * r.total_battery_wh);
    }
}
