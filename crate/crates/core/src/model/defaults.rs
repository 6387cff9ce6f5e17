//! Shipped default parameter set.
//!
//! Efficiencies, capacity and power ceilings describe a mid-size electric
//! car. The open-circuit voltage curve, limit surfaces, heat capacity,
//! leakage coefficient and heater ceiling are calibrated placeholders;
//! override them from a config file when real data is available.

use super::params::VehicleParams;
use super::table::{Table1D, Table2D};

pub const CAPACITY_AH: f64 = 200.0;
pub const P_DCHG_PEAK_W: f64 = 350_000.0;
pub const P_CHG_PEAK_W: f64 = -150_000.0;
pub const P_AUX_W: f64 = 500.0;
pub const P_HVCH_CABIN_W: f64 = 1978.0;
pub const T_AMB_C: f64 = -7.0;
pub const GAMMA_W_PER_K: f64 = 35.0;
pub const DT_S: f64 = 30.0;

pub const SOC0: f64 = 0.90;
pub const TB0_C: f64 = -7.0;
pub const SOC_TARGET: f64 = 0.60;
pub const TB_TARGET_C: f64 = 25.0;

const LIMIT_SOC_KNOTS: [f64; 6] = [0.05, 0.2, 0.4, 0.6, 0.8, 1.0];
const LIMIT_TB_KNOTS: [f64; 8] = [-30.0, -20.0, -10.0, 0.0, 10.0, 25.0, 40.0, 55.0];

/// Normalized discharge limit: product of a soc factor and a temperature
/// factor, peaking at 1 in the (full, hot) corner.
fn discharge_shape() -> Vec<Vec<f64>> {
    let soc_f = [0.35, 0.60, 0.80, 0.90, 0.97, 1.0];
    let tb_f = [0.30, 0.45, 0.60, 0.75, 0.88, 0.97, 1.0, 1.0];
    tb_f.iter()
        .map(|t| soc_f.iter().map(|s| s * t).collect())
        .collect()
}

/// Normalized charge-limit magnitude, peaking at 1 in the (empty, hot) corner.
fn charge_shape() -> Vec<Vec<f64>> {
    let soc_f = [1.0, 0.95, 0.85, 0.70, 0.50, 0.30];
    let tb_f = [0.10, 0.15, 0.25, 0.45, 0.70, 1.0, 1.0, 1.0];
    tb_f.iter()
        .map(|t| soc_f.iter().map(|s| s * t).collect())
        .collect()
}

pub fn uoc_table() -> Table1D {
    Table1D {
        x: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        y: vec![
            340.0, 356.0, 368.0, 378.0, 386.0, 392.0, 396.0, 399.0, 402.0, 405.0, 420.0,
        ],
    }
}

pub fn discharge_limit() -> Table2D {
    Table2D {
        soc: LIMIT_SOC_KNOTS.to_vec(),
        tb: LIMIT_TB_KNOTS.to_vec(),
        values: discharge_shape(),
    }
    .scaled(P_DCHG_PEAK_W)
}

pub fn charge_limit() -> Table2D {
    Table2D {
        soc: LIMIT_SOC_KNOTS.to_vec(),
        tb: LIMIT_TB_KNOTS.to_vec(),
        values: charge_shape(),
    }
    .scaled(-P_CHG_PEAK_W)
    .scaled(-1.0)
}

pub fn vehicle_params() -> VehicleParams {
    VehicleParams {
        capacity_ah: CAPACITY_AH,
        uoc: uoc_table(),
        r_ref_ohm: 0.06,
        t_ref_k: 298.15,
        thermal_capacitance: 3.0e5,
        eta_hvch: 0.87,
        eta_ed_e: 0.90,
        eta_ed_q: 0.80,
        p_hvch_max_w: 5200.0,
        soc_min: 0.05,
        soc_max: 1.0,
        tb_min_c: -30.0,
        tb_max_c: 55.0,
        discharge_limit: discharge_limit(),
        charge_limit: charge_limit(),
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        vehicle_params()
    }
}
