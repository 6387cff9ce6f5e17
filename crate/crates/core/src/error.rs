use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Demanded terminal power exceeds what the battery can deliver, `U_oc^2 / 4R`.
    #[error("power infeasible{}: terminal power {p_terminal:.1} W exceeds deliverable {p_max:.1} W", step_suffix(.step))]
    PowerInfeasible {
        step: Option<usize>,
        p_terminal: f64,
        p_max: f64,
    },

    #[error("no crossing: backward sweep reached the first sample {margin_k:.3} K above the forward trajectory")]
    NoCrossing { margin_k: f64 },

    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("trajectory integrity: {0}")]
    Integrity(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn step_suffix(step: &Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step {k}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a step index to a `PowerInfeasible` error, leaving others untouched.
    pub fn at_step(self, k: usize) -> Self {
        match self {
            Error::PowerInfeasible {
                p_terminal, p_max, ..
            } => Error::PowerInfeasible {
                step: Some(k),
                p_terminal,
                p_max,
            },
            other => other,
        }
    }

    /// Short machine-readable tag used in CLI error JSON and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::PowerInfeasible { .. } => "power_infeasible",
            Error::NoCrossing { .. } => "no_crossing",
            Error::InfeasibleProblem(_) => "infeasible_problem",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::Integrity(_) => "integrity",
            Error::Invalid(_) => "invalid_input",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
