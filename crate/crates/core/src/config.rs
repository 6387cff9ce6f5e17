//! TOML run configuration.
//!
//! Every section is optional and falls back to the shipped defaults.
//!
//! ```toml
//! [vehicle]
//! thermal_capacitance = 3.0e5
//! uoc = { x = [0.0, 1.0], y = [340.0, 420.0] }
//!
//! [limits]
//! discharge = "dchg.csv"          # or an inline { soc, tb, values } table
//!
//! [dp]
//! n_soc = 61
//!
//! [cycle-defaults]
//! t_amb_c = -7.0
//!
//! [scenario]
//! soc0 = 0.9
//! tb_target_c = 25.0
//! ```
//!
//! Limit CSV files hold soc knots in the header row after a leading corner
//! cell and one row per temperature knot, first column the temperature.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cycle_io::CycleDefaults;
use crate::error::{Error, Result};
use crate::heuristic::Targets;
use crate::model::table::Table2D;
use crate::model::{defaults, State, VehicleParams};
use crate::oracle::DpGrid;

/// Initial state and arrival targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub soc0: f64,
    pub tb0_c: f64,
    pub soc_target: f64,
    pub tb_target_c: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            soc0: defaults::SOC0,
            tb0_c: defaults::TB0_C,
            soc_target: defaults::SOC_TARGET,
            tb_target_c: defaults::TB_TARGET_C,
        }
    }
}

impl Scenario {
    pub fn initial(&self) -> State {
        State::new(self.soc0, self.tb0_c)
    }

    pub fn targets(&self) -> Targets {
        Targets {
            soc: self.soc_target,
            tb: self.tb_target_c,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub dp: DpGrid,
    pub cycle_defaults: CycleDefaults,
    pub scenario: Scenario,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LimitSource {
    Csv(PathBuf),
    Inline(Table2D),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Limits {
    discharge: Option<LimitSource>,
    charge: Option<LimitSource>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    vehicle: Option<toml::Table>,
    #[serde(default)]
    limits: Limits,
    #[serde(default)]
    dp: DpGrid,
    #[serde(default, rename = "cycle-defaults")]
    cycle_defaults: CycleDefaults,
    #[serde(default)]
    scenario: Scenario,
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// Load and validate a config file. Relative limit CSV paths resolve
/// against the config file's directory.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        Error::Config(m) => config_err(path, m),
        other => other,
    })
}

/// Parse config text; `base` anchors relative paths.
pub fn parse_config(text: &str, base: &Path) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let mut vehicle = toml::Table::try_from(VehicleParams::default())
        .map_err(|e| Error::Config(e.to_string()))?;
    if let Some(over) = raw.vehicle {
        for (key, value) in over {
            if key == "discharge_limit" || key == "charge_limit" {
                return Err(Error::Config(format!("{key} belongs in [limits]")));
            }
            if !vehicle.contains_key(&key) {
                return Err(Error::Config(format!("unknown vehicle parameter '{key}'")));
            }
            vehicle.insert(key, value);
        }
    }
    let mut vehicle: VehicleParams = vehicle
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if let Some(src) = raw.limits.discharge {
        vehicle.discharge_limit = resolve_limit(src, base)?;
    }
    if let Some(src) = raw.limits.charge {
        vehicle.charge_limit = resolve_limit(src, base)?;
    }
    vehicle.validate()?;

    let cfg = Config {
        vehicle,
        dp: raw.dp,
        cycle_defaults: raw.cycle_defaults,
        scenario: raw.scenario,
    };
    let s = &cfg.scenario;
    if ![s.soc0, s.tb0_c, s.soc_target, s.tb_target_c]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::Config("non-finite scenario value".into()));
    }
    Ok(cfg)
}

fn resolve_limit(src: LimitSource, base: &Path) -> Result<Table2D> {
    match src {
        LimitSource::Inline(t) => Ok(t),
        LimitSource::Csv(p) => load_limit_csv(&base.join(p)),
    }
}

/// Read a limit surface from CSV (see module docs for the layout).
pub fn load_limit_csv(path: &Path) -> Result<Table2D> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_limit_csv(file, path)
}

pub(crate) fn read_limit_csv(reader: impl std::io::Read, path: &Path) -> Result<Table2D> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let num = |s: &str, line: u64| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("not a number: '{s}'")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value '{s}'")));
        }
        Ok(v)
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut soc = Vec::new();
    let mut tb = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 1;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if i == 0 {
            soc = rec
                .iter()
                .skip(1)
                .map(|s| num(s, line))
                .collect::<Result<_>>()?;
            continue;
        }
        if rec.len() != soc.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", soc.len() + 1, rec.len()),
            ));
        }
        tb.push(num(&rec[0], line)?);
        values.push(
            rec.iter()
                .skip(1)
                .map(|s| num(s, line))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let table = Table2D { soc, tb, values };
    table
        .validate()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(table)
}
