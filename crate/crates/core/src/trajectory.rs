use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    step_back_sample, step_sample, DriveCycle, PowerBreakdown, State, VehicleParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Forward,
    Backward,
    Spliced,
    Oracle,
}

/// Time-indexed states with the controls and power flows between them.
///
/// `states[i]` sits at cycle sample `offset + i`; `controls[i]` and
/// `breakdowns[i]` belong to the interval from `states[i]` to `states[i+1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub origin: Origin,
    pub dt: f64,
    pub offset: usize,
    pub states: Vec<State>,
    pub controls: Vec<f64>,
    pub breakdowns: Vec<PowerBreakdown>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn initial(&self) -> State {
        self.states[0]
    }

    pub fn terminal(&self) -> State {
        *self
            .states
            .last()
            .expect("trajectory has at least one state")
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.tb).collect()
    }

    /// Index of the first step with a non-zero heater command, or `steps()`
    /// when the heater is never used.
    pub fn switch_index(&self) -> usize {
        self.controls
            .iter()
            .position(|&u| u > 0.0)
            .unwrap_or(self.controls.len())
    }

    pub fn limit_violations(&self) -> Vec<usize> {
        self.breakdowns
            .iter()
            .enumerate()
            .filter(|(_, b)| b.limit_violation)
            .map(|(i, _)| self.offset + i)
            .collect()
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.states.len() != self.controls.len() + 1 {
            return Err(Error::Integrity(format!(
                "{} states for {} controls",
                self.states.len(),
                self.controls.len()
            )));
        }
        if self.breakdowns.len() != self.controls.len() {
            return Err(Error::Integrity(format!(
                "{} breakdowns for {} controls",
                self.breakdowns.len(),
                self.controls.len()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Integrity("non-positive dt".into()));
        }
        Ok(())
    }

    /// Check that the trajectory lies inside `cycle` at its offset.
    pub fn check_within(&self, cycle: &DriveCycle) -> Result<()> {
        self.check_shape()?;
        if self.offset + self.steps() > cycle.steps() {
            return Err(Error::Integrity(format!(
                "trajectory covers steps {}..{} but cycle has {} steps",
                self.offset,
                self.offset + self.steps(),
                cycle.steps()
            )));
        }
        if self.dt != cycle.dt() {
            return Err(Error::Integrity(format!(
                "trajectory dt {} differs from cycle dt {}",
                self.dt,
                cycle.dt()
            )));
        }
        Ok(())
    }

    /// Check that the trajectory spans exactly `cycle`.
    pub fn check_spans(&self, cycle: &DriveCycle) -> Result<()> {
        self.check_within(cycle)?;
        if self.offset != 0 || self.steps() != cycle.steps() {
            return Err(Error::Integrity(format!(
                "trajectory covers steps {}..{} but cycle has {} steps",
                self.offset,
                self.offset + self.steps(),
                cycle.steps()
            )));
        }
        Ok(())
    }

    /// Largest absolute state mismatch when replaying each step with the
    /// step operation that produced it. Returns `(soc, tb)` mismatches.
    pub fn replay_mismatch(
        &self,
        params: &VehicleParams,
        cycle: &DriveCycle,
    ) -> Result<(f64, f64)> {
        self.check_within(cycle)?;
        let mut worst = (0.0f64, 0.0f64);
        for i in 0..self.steps() {
            let sample = cycle.sample(self.offset + i);
            let (a, b) = match self.origin {
                Origin::Backward => {
                    let (prev, _) = step_back_sample(
                        params,
                        self.states[i + 1],
                        self.controls[i],
                        sample,
                        self.dt,
                    )?;
                    (prev, self.states[i])
                }
                _ => {
                    let (next, _) =
                        step_sample(params, self.states[i], self.controls[i], sample, self.dt)?;
                    (next, self.states[i + 1])
                }
            };
            worst.0 = worst.0.max((a.soc - b.soc).abs());
            worst.1 = worst.1.max((a.tb - b.tb).abs());
        }
        Ok(worst)
    }

    /// Split at state `m`: the first part holds steps `..m`, the second
    /// `m..`; both share state `m`.
    pub fn split_at(&self, m: usize) -> Result<(Trajectory, Trajectory)> {
        if m == 0 || m >= self.steps() {
            return Err(Error::Invalid(format!(
                "split point {m} must lie strictly inside 0..{}",
                self.steps()
            )));
        }
        let head = Trajectory {
            origin: self.origin,
            dt: self.dt,
            offset: self.offset,
            states: self.states[..=m].to_vec(),
            controls: self.controls[..m].to_vec(),
            breakdowns: self.breakdowns[..m].to_vec(),
        };
        let tail = Trajectory {
            origin: self.origin,
            dt: self.dt,
            offset: self.offset + m,
            states: self.states[m..].to_vec(),
            controls: self.controls[m..].to_vec(),
            breakdowns: self.breakdowns[m..].to_vec(),
        };
        Ok((head, tail))
    }
}

/// Forward Euler rollout under a fixed battery-heater schedule.
pub fn simulate(
    params: &VehicleParams,
    cycle: &DriveCycle,
    initial: State,
    controls: &[f64],
    origin: Origin,
) -> Result<Trajectory> {
    let n = cycle.steps();
    if controls.len() != n {
        return Err(Error::Invalid(format!(
            "schedule has {} entries for a cycle of {n} steps",
            controls.len()
        )));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut breakdowns = Vec::with_capacity(n);
    states.push(initial);
    let mut s = initial;
    for (k, &u) in controls.iter().enumerate() {
        let (next, b) =
            step_sample(params, s, u, cycle.sample(k), cycle.dt()).map_err(|e| e.at_step(k))?;
        breakdowns.push(b);
        states.push(next);
        s = next;
    }
    Ok(Trajectory {
        origin,
        dt: cycle.dt(),
        offset: 0,
        states,
        controls: controls.to_vec(),
        breakdowns,
    })
}
