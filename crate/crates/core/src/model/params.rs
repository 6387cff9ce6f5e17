use serde::{Deserialize, Serialize};

use super::table::{Table1D, Table2D};
use super::State;
use crate::error::{Error, Result};

pub const KELVIN_OFFSET: f64 = 273.15;

/// Electrical, thermal and limit constants of the vehicle.
///
/// Temperatures are in celsius except `t_ref_k`. Powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Charge capacity, ampere-hours.
    pub capacity_ah: f64,
    /// Open-circuit voltage over soc.
    pub uoc: Table1D,
    /// Internal resistance at `t_ref_k`.
    pub r_ref_ohm: f64,
    pub t_ref_k: f64,
    /// Lumped heat capacity of the pack (specific heat times mass), J/K.
    pub thermal_capacitance: f64,
    pub eta_hvch: f64,
    /// Drivetrain electrical efficiency.
    pub eta_ed_e: f64,
    /// Fraction of drivetrain losses reaching the battery loop as heat.
    pub eta_ed_q: f64,
    /// Total coolant heater power ceiling shared by cabin and battery.
    pub p_hvch_max_w: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub tb_min_c: f64,
    pub tb_max_c: f64,
    /// Maximum discharge power over (soc, tb), watts, non-negative.
    pub discharge_limit: Table2D,
    /// Minimum (most negative) charge power over (soc, tb), watts, non-positive.
    pub charge_limit: Table2D,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let finite = [
            self.capacity_ah,
            self.r_ref_ohm,
            self.t_ref_k,
            self.thermal_capacitance,
            self.eta_hvch,
            self.eta_ed_e,
            self.eta_ed_q,
            self.p_hvch_max_w,
            self.soc_min,
            self.soc_max,
            self.tb_min_c,
            self.tb_max_c,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite vehicle parameter");
        }
        if self.capacity_ah <= 0.0 || self.r_ref_ohm <= 0.0 || self.t_ref_k <= 0.0 {
            return bad(
                "capacity, reference resistance and reference temperature must be positive",
            );
        }
        if self.thermal_capacitance <= 0.0 {
            return bad("thermal_capacitance must be positive");
        }
        if self.p_hvch_max_w < 0.0 {
            return bad("p_hvch_max_w must be non-negative");
        }
        for (name, eta) in [("eta_hvch", self.eta_hvch), ("eta_ed_q", self.eta_ed_q)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.eta_ed_e > 0.0 && self.eta_ed_e < 1.0) {
            return bad("eta_ed_e must lie in (0, 1)");
        }
        if !(0.0 < self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return bad("need 0 < soc_min < soc_max <= 1");
        }
        if self.tb_min_c >= self.tb_max_c {
            return bad("need tb_min_c < tb_max_c");
        }
        if self.tb_min_c + KELVIN_OFFSET <= 0.0 {
            return bad("tb_min_c is below absolute zero");
        }

        self.uoc.validate()?;
        if self.uoc.x[0] < 0.0 || self.uoc.x[self.uoc.x.len() - 1] > 1.0 {
            return bad("uoc soc knots must lie in [0, 1]");
        }
        if self.uoc.y.iter().any(|&v| v <= 0.0) {
            return bad("uoc voltages must be positive");
        }
        if self.uoc.y.windows(2).any(|w| w[1] <= w[0]) {
            return bad("uoc must be strictly increasing in soc");
        }

        self.discharge_limit.validate()?;
        self.charge_limit.validate()?;
        if self.discharge_limit.min_value() < 0.0 {
            return bad("discharge limit must be non-negative everywhere");
        }
        if self.charge_limit.max_value() > 0.0 {
            return bad("charge limit must be non-positive everywhere");
        }
        if self.discharge_limit.monotone_by(|v| v) != (true, true) {
            return bad("discharge limit must be non-decreasing in soc and tb");
        }
        // chg <= 0, so |chg| falling with soc means chg rising with soc
        let soc_dir = self.charge_limit.monotone_by(|v| v).0;
        let tb_dir = self.charge_limit.monotone_by(|v| -v).1;
        if !soc_dir || !tb_dir {
            return bad("charge limit magnitude must fall with soc and rise with tb");
        }
        Ok(())
    }

    /// Capacity in ampere-seconds.
    pub fn capacity_as(&self) -> f64 {
        self.capacity_ah * 3600.0
    }

    pub fn open_circuit_voltage(&self, soc: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::Domain(format!("soc {soc} outside [0, 1]")));
        }
        Ok(self.uoc.eval(soc))
    }

    /// `R(tb) = r_ref * t_ref / T`, with `T` the absolute temperature.
    pub fn internal_resistance(&self, tb_c: f64) -> Result<f64> {
        let t_abs = tb_c + KELVIN_OFFSET;
        if !(t_abs > 0.0) {
            return Err(Error::Domain(format!(
                "battery temperature {tb_c} C is not above absolute zero"
            )));
        }
        Ok(self.r_ref_ohm * self.t_ref_k / t_abs)
    }

    /// Battery current for a given terminal power, the smaller root of
    /// `R I^2 - U_oc I + P_t = 0`.
    pub fn battery_current(&self, state: State, p_terminal: f64) -> Result<f64> {
        let uoc = self.open_circuit_voltage(state.soc)?;
        let r = self.internal_resistance(state.tb)?;
        current_from(uoc, r, p_terminal)
    }

    pub fn joule_heat(&self, state: State, current: f64) -> Result<f64> {
        Ok(self.internal_resistance(state.tb)? * current * current)
    }

    /// Drivetrain loss heat reaching the battery loop. Regeneration
    /// (negative propulsion power) contributes nothing.
    pub fn ed_heat(&self, p_prop: f64) -> f64 {
        self.eta_ed_q * (1.0 - self.eta_ed_e) * p_prop.max(0.0)
    }

    /// `(chg_min, dchg_max)` at the given state, clamped to the table hull.
    pub fn power_limits(&self, state: State) -> (f64, f64) {
        let chg = self.charge_limit.eval(state.soc, state.tb).min(0.0);
        let dchg = self.discharge_limit.eval(state.soc, state.tb).max(0.0);
        (chg, dchg)
    }

    pub fn in_bounds(&self, state: State) -> bool {
        state.soc >= self.soc_min
            && state.soc <= self.soc_max
            && state.tb >= self.tb_min_c
            && state.tb <= self.tb_max_c
    }
}

/// Quadratic current solve shared by the forward and backward steps.
///
/// Uses the cancellation-free form `2 P_t / (U + sqrt(U^2 - 4 R P_t))`,
/// algebraically identical to `(U - sqrt(U^2 - 4 R P_t)) / 2R`.
pub fn current_from(uoc: f64, r: f64, p_terminal: f64) -> Result<f64> {
    let disc = uoc * uoc - 4.0 * r * p_terminal;
    if !(disc >= 0.0) {
        return Err(Error::PowerInfeasible {
            step: None,
            p_terminal,
            p_max: uoc * uoc / (4.0 * r),
        });
    }
    Ok(2.0 * p_terminal / (uoc + disc.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::defaults;

    fn params() -> VehicleParams {
        defaults::vehicle_params()
    }

    #[test]
    fn defaults_validate() {
        params().validate().unwrap();
    }

    #[test]
    fn resistance_at_reference_is_r_ref() {
        let p = params();
        let r = p.internal_resistance(p.t_ref_k - KELVIN_OFFSET).unwrap();
        assert!((r - p.r_ref_ohm).abs() < 1e-15);
    }

    #[test]
    fn resistance_at_minus_seven() {
        let p = params();
        // 0.06 * 298.15 / 266.15
        let r = p.internal_resistance(-7.0).unwrap();
        assert!((r - 0.067_214).abs() < 1e-6, "{r}");
    }

    #[test]
    fn resistance_rejects_absolute_zero() {
        assert!(matches!(
            params().internal_resistance(-KELVIN_OFFSET),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn uoc_rejects_out_of_range() {
        let p = params();
        assert!(p.open_circuit_voltage(-0.01).is_err());
        assert!(p.open_circuit_voltage(1.01).is_err());
        assert!(p.open_circuit_voltage(1.0).is_ok());
    }

    #[test]
    fn current_hand_values() {
        assert_eq!(current_from(400.0, 0.1, 0.0).unwrap(), 0.0);
        let i = current_from(400.0, 0.1, 40_000.0).unwrap();
        assert!((i - 102.633).abs() < 1e-3, "{i}");
        assert!((400.0 * i - 0.1 * i * i - 40_000.0).abs() < 1e-3);
        let i = current_from(400.0, 0.1, -20_000.0).unwrap();
        assert!(i < 0.0);
        assert!((400.0 * i - 0.1 * i * i + 20_000.0).abs() < 1e-3);
    }

    #[test]
    fn current_negative_discriminant() {
        // U^2 / 4R = 400 kW
        let err = current_from(400.0, 0.1, 400_001.0).unwrap_err();
        assert!(matches!(err, Error::PowerInfeasible { .. }));
    }

    #[test]
    fn joule_heat_hand_value_and_symmetry() {
        let p = params();
        let s = State::new(0.5, -7.0);
        let q = p.joule_heat(s, 100.0).unwrap();
        assert!((q - 672.14).abs() < 0.01, "{q}");
        assert_eq!(q, p.joule_heat(s, -100.0).unwrap());
        assert_eq!(p.joule_heat(s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ed_heat_values() {
        let p = params();
        assert_eq!(p.ed_heat(0.0), 0.0);
        assert!((p.ed_heat(50_000.0) - 4000.0).abs() < 1e-9);
        assert_eq!(p.ed_heat(-30_000.0), 0.0);
    }

    #[test]
    fn validation_catches_broken_tables() {
        let mut p = params();
        p.uoc.y[3] = p.uoc.y[2];
        assert!(p.validate().is_err());

        let mut p = params();
        p.discharge_limit.values[0][0] = -1.0;
        assert!(p.validate().is_err());

        let mut p = params();
        p.charge_limit.values[2][2] = 10.0;
        assert!(p.validate().is_err());

        let mut p = params();
        p.soc_min = 0.0;
        assert!(p.validate().is_err());
    }
}
