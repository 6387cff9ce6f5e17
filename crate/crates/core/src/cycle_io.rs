//! Drive-cycle CSV ingestion/export and the seeded synthetic cycle generator.

use std::collections::HashMap;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{defaults, CycleSample, DriveCycle};

pub const COLUMNS: [&str; 7] = [
    "time_s",
    "speed_mps",
    "p_prop_w",
    "p_aux_w",
    "p_hvch_cabin_w",
    "t_amb_c",
    "gamma_w_per_k",
];

/// Allowed deviation of each time step from the inferred dt, seconds.
const SPACING_TOLERANCE_S: f64 = 1e-6;

/// Values used for columns a cycle file leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleDefaults {
    pub p_aux_w: f64,
    pub p_hvch_cabin_w: f64,
    pub t_amb_c: f64,
    pub gamma_w_per_k: f64,
}

impl Default for CycleDefaults {
    fn default() -> Self {
        CycleDefaults {
            p_aux_w: defaults::P_AUX_W,
            p_hvch_cabin_w: defaults::P_HVCH_CABIN_W,
            t_amb_c: defaults::T_AMB_C,
            gamma_w_per_k: defaults::GAMMA_W_PER_K,
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Load a cycle CSV. `time_s` and `p_prop_w` are required; other columns
/// fall back to `defaults` (speed to zero).
pub fn load_cycle(path: impl AsRef<Path>, defaults: &CycleDefaults) -> Result<DriveCycle> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cycle(file, path, defaults)
}

pub(crate) fn read_cycle<R: std::io::Read>(
    reader: R,
    path: &Path,
    defaults: &CycleDefaults,
) -> Result<DriveCycle> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();

    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if !COLUMNS.contains(&h) {
            return Err(parse_err(path, 1, format!("unknown column '{h}'")));
        }
        if index.insert(h.to_string(), i).is_some() {
            return Err(parse_err(path, 1, format!("duplicate column '{h}'")));
        }
    }
    for required in ["time_s", "p_prop_w"] {
        if !index.contains_key(required) {
            return Err(parse_err(
                path,
                1,
                format!("missing required column '{required}'"),
            ));
        }
    }

    let mut times: Vec<(f64, usize)> = Vec::new();
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |name: &str, fallback: f64| -> Result<f64> {
            match index.get(name) {
                None => Ok(fallback),
                Some(&i) => {
                    let raw = record.get(i).unwrap_or("");
                    let v: f64 = raw.parse().map_err(|_| {
                        parse_err(path, line, format!("{name}: cannot parse '{raw}'"))
                    })?;
                    if !v.is_finite() {
                        return Err(parse_err(
                            path,
                            line,
                            format!("{name}: non-finite value '{raw}'"),
                        ));
                    }
                    Ok(v)
                }
            }
        };
        let t = field("time_s", f64::NAN)?;
        if let Some(&(prev, _)) = times.last() {
            if t <= prev {
                return Err(parse_err(
                    path,
                    line,
                    format!("time {t} is not after the previous sample {prev}"),
                ));
            }
        }
        times.push((t, line));
        samples.push(CycleSample {
            speed_mps: field("speed_mps", 0.0)?,
            p_prop_w: field("p_prop_w", f64::NAN)?,
            p_aux_w: field("p_aux_w", defaults.p_aux_w)?,
            p_hvch_cabin_w: field("p_hvch_cabin_w", defaults.p_hvch_cabin_w)?,
            t_amb_c: field("t_amb_c", defaults.t_amb_c)?,
            gamma_w_per_k: field("gamma_w_per_k", defaults.gamma_w_per_k)?,
        });
    }
    if times.len() < 2 {
        return Err(parse_err(path, 0, "a cycle needs at least two rows"));
    }
    let dt = times[1].0 - times[0].0;
    for w in times.windows(2) {
        let step = w[1].0 - w[0].0;
        if (step - dt).abs() > SPACING_TOLERANCE_S {
            return Err(parse_err(
                path,
                w[1].1,
                format!("non-uniform spacing: step {step} s differs from {dt} s"),
            ));
        }
    }
    DriveCycle::new(dt, samples)
}

pub fn write_cycle<W: std::io::Write>(cycle: &DriveCycle, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Invalid(format!("csv write: {e}"));
    w.write_record(COLUMNS).map_err(io)?;
    for (k, s) in cycle.samples().iter().enumerate() {
        w.write_record([
            cycle.time_s(k).to_string(),
            s.speed_mps.to_string(),
            s.p_prop_w.to_string(),
            s.p_aux_w.to_string(),
            s.p_hvch_cabin_w.to_string(),
            s.t_amb_c.to_string(),
            s.gamma_w_per_k.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Invalid(format!("csv write: {e}")))?;
    Ok(())
}

pub fn save_cycle(cycle: &DriveCycle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_cycle(cycle, std::io::BufWriter::new(file))
}

/// Parameters of a synthetic urban/highway cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub dt_s: f64,
    /// Mean propulsion power over the driving steps, regeneration included.
    pub mean_prop_kw: f64,
    /// Relative spread of the propulsion noise, 0 gives piecewise-constant segments.
    pub variability: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub defaults: CycleDefaults,
}

impl Default for SynthSpec {
    /// One hour at 30 s sampling, the preset cycle.
    fn default() -> Self {
        SynthSpec {
            duration_s: 3600.0,
            dt_s: defaults::DT_S,
            mean_prop_kw: 17.5,
            variability: 0.5,
            seed: 7,
            defaults: CycleDefaults::default(),
        }
    }
}

const URBAN_LEVEL: f64 = 0.6;
const HIGHWAY_LEVEL: f64 = 1.4;
const PEAK_FACTOR: f64 = 4.0;
const REGEN_FLOOR_FACTOR: f64 = 0.8;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Deterministic synthetic drive cycle alternating urban and highway
/// segments, with regenerative braking events.
pub fn synth_cycle(spec: &SynthSpec) -> Result<DriveCycle> {
    if !(spec.duration_s > 0.0 && spec.dt_s > 0.0) {
        return Err(Error::Invalid("duration and dt must be positive".into()));
    }
    if !(spec.mean_prop_kw > 0.0) || !(spec.variability >= 0.0) {
        return Err(Error::Invalid(
            "mean_prop_kw must be positive and variability non-negative".into(),
        ));
    }
    let steps_f = spec.duration_s / spec.dt_s;
    let n = steps_f.round() as usize;
    if n == 0 || (steps_f - n as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::Invalid(format!(
            "duration {} s is not a multiple of dt {} s",
            spec.duration_s, spec.dt_s
        )));
    }

    let mean_w = spec.mean_prop_kw * 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut p = Vec::with_capacity(n);
    let mut speed = Vec::with_capacity(n);
    let phi: f64 = 0.8;
    let mut ar = 0.0;
    while p.len() < n {
        let highway = rng.random_bool(0.45);
        let seg_s: f64 = rng.random_range(240.0..900.0);
        let len = ((seg_s / spec.dt_s).round() as usize).max(1);
        let (level, v_base, brake_p) = if highway {
            (HIGHWAY_LEVEL, 29.0, 0.04)
        } else {
            (URBAN_LEVEL, 11.0, 0.15)
        };
        for _ in 0..len.min(n - p.len()) {
            ar = phi * ar + (1.0 - phi * phi).sqrt() * gaussian(&mut rng);
            if rng.random_bool(brake_p) {
                let f: f64 = rng.random_range(0.2..0.7);
                p.push(-f * mean_w);
                speed.push(v_base * 0.6);
            } else {
                p.push((mean_w * level * (1.0 + spec.variability * ar)).max(0.0));
                speed.push((v_base * (1.0 + 0.15 * ar)).max(0.0));
            }
        }
    }

    // Rescale traction samples so the mean lands on target, then clamp peaks.
    let peak = PEAK_FACTOR * mean_w;
    let floor = -REGEN_FLOOR_FACTOR * mean_w;
    for _ in 0..20 {
        let pos: f64 = p.iter().filter(|&&x| x > 0.0).sum();
        let neg: f64 = p.iter().filter(|&&x| x < 0.0).sum();
        if pos <= 0.0 {
            break;
        }
        let f = (mean_w * n as f64 - neg) / pos;
        for x in p.iter_mut() {
            if *x > 0.0 {
                *x *= f;
            }
            *x = x.clamp(floor, peak);
        }
        let mean = p.iter().sum::<f64>() / n as f64;
        if (mean - mean_w).abs() <= 1e-6 * mean_w {
            break;
        }
    }
    let mean = p.iter().sum::<f64>() / n as f64;
    if (mean - mean_w).abs() > 0.02 * mean_w {
        return Err(Error::Invalid(format!(
            "could not reach mean {mean_w} W (got {mean} W); lower the variability"
        )));
    }

    let d = spec.defaults;
    let mut samples: Vec<CycleSample> = p
        .iter()
        .zip(&speed)
        .map(|(&p_prop_w, &speed_mps)| CycleSample {
            speed_mps,
            p_prop_w,
            p_aux_w: d.p_aux_w,
            p_hvch_cabin_w: d.p_hvch_cabin_w,
            t_amb_c: d.t_amb_c,
            gamma_w_per_k: d.gamma_w_per_k,
        })
        .collect();
    // arrival
    samples.push(CycleSample {
        speed_mps: 0.0,
        p_prop_w: 0.0,
        ..samples[n - 1]
    });
    DriveCycle::new(spec.dt_s, samples)
}
