use serde::{Deserialize, Serialize};

use super::params::VehicleParams;
use crate::error::{Error, Result};

/// Exogenous inputs at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub speed_mps: f64,
    /// Propulsion power, negative while regenerating.
    pub p_prop_w: f64,
    pub p_aux_w: f64,
    pub p_hvch_cabin_w: f64,
    pub t_amb_c: f64,
    /// Battery-to-ambient heat transfer coefficient.
    pub gamma_w_per_k: f64,
}

impl CycleSample {
    fn is_finite(&self) -> bool {
        [
            self.speed_mps,
            self.p_prop_w,
            self.p_aux_w,
            self.p_hvch_cabin_w,
            self.t_amb_c,
            self.gamma_w_per_k,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Uniformly sampled drive cycle. Sample `k` holds the inputs applied over
/// the interval `[k dt, (k+1) dt)`; the last sample marks arrival and is
/// only read for its timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    dt_s: f64,
    samples: Vec<CycleSample>,
}

impl DriveCycle {
    pub fn new(dt_s: f64, samples: Vec<CycleSample>) -> Result<Self> {
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(Error::Invalid(format!("dt must be positive, got {dt_s}")));
        }
        if samples.len() < 2 {
            return Err(Error::Invalid(format!(
                "a cycle needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value in sample {k}")));
        }
        if let Some(k) = samples
            .iter()
            .position(|s| s.p_aux_w < 0.0 || s.p_hvch_cabin_w < 0.0 || s.gamma_w_per_k < 0.0)
        {
            return Err(Error::Invalid(format!(
                "sample {k}: aux power, cabin heater power and leakage coefficient must be non-negative"
            )));
        }
        Ok(DriveCycle { dt_s, samples })
    }

    /// Check the cycle against a vehicle: cabin heating must fit under the
    /// heater ceiling at every sample.
    pub fn check_against(&self, params: &VehicleParams) -> Result<()> {
        match self
            .samples
            .iter()
            .position(|s| s.p_hvch_cabin_w > params.p_hvch_max_w)
        {
            Some(k) => Err(Error::Invalid(format!(
                "sample {k}: cabin heater demand {} W exceeds heater ceiling {} W",
                self.samples[k].p_hvch_cabin_w, params.p_hvch_max_w
            ))),
            None => Ok(()),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt_s
    }

    /// Number of integration intervals, one less than the sample count.
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[CycleSample] {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> &CycleSample {
        &self.samples[k]
    }

    pub fn duration_s(&self) -> f64 {
        self.steps() as f64 * self.dt_s
    }

    pub fn time_s(&self, k: usize) -> f64 {
        k as f64 * self.dt_s
    }

    /// Sub-cycle spanning samples `start..=end`.
    pub fn window(&self, start: usize, end: usize) -> Result<DriveCycle> {
        if end <= start || end >= self.samples.len() {
            return Err(Error::Invalid(format!(
                "window {start}..={end} outside cycle of {} samples",
                self.samples.len()
            )));
        }
        Ok(DriveCycle {
            dt_s: self.dt_s,
            samples: self.samples[start..=end].to_vec(),
        })
    }

    /// Heater power available for the battery at step `k`.
    pub fn hvch_headroom(&self, params: &VehicleParams, k: usize) -> f64 {
        (params.p_hvch_max_w - self.samples[k].p_hvch_cabin_w).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CycleSample {
        CycleSample {
            speed_mps: 10.0,
            p_prop_w: 1000.0,
            p_aux_w: 500.0,
            p_hvch_cabin_w: 1978.0,
            t_amb_c: -7.0,
            gamma_w_per_k: 35.0,
        }
    }

    #[test]
    fn rejects_degenerate_cycles() {
        assert!(DriveCycle::new(30.0, vec![sample()]).is_err());
        assert!(DriveCycle::new(0.0, vec![sample(); 3]).is_err());
        let mut bad = sample();
        bad.t_amb_c = f64::NAN;
        assert!(DriveCycle::new(30.0, vec![sample(), bad]).is_err());
    }

    #[test]
    fn window_keeps_dt() {
        let c = DriveCycle::new(30.0, vec![sample(); 5]).unwrap();
        assert_eq!(c.steps(), 4);
        let w = c.window(1, 3).unwrap();
        assert_eq!(w.steps(), 2);
        assert_eq!(w.dt(), 30.0);
        assert!(c.window(3, 3).is_err());
        assert!(c.window(0, 5).is_err());
    }

    #[test]
    fn cabin_over_ceiling_is_rejected() {
        let mut p = crate::model::defaults::vehicle_params();
        p.p_hvch_max_w = 1000.0;
        let c = DriveCycle::new(30.0, vec![sample(); 2]).unwrap();
        assert!(c.check_against(&p).is_err());
    }
}
