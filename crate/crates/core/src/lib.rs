//! Battery preheating planner for an electric vehicle driving to a
//! fast-charging stop in cold weather.
//!
//! The [`model`] module holds the electro-thermal battery model and its
//! Euler step. [`heuristic`] plans the heater switch-on time with a forward
//! and a backward sweep; [`oracle`] solves the same problem by dynamic
//! programming to measure how far the sweep planner is from optimal.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod config;
pub mod cycle_io;
pub mod error;
pub mod heuristic;
pub mod model;
pub mod oracle;
pub mod report;
pub mod trajectory;

pub use accounting::{energy_report, verify_balances, BalanceReport, EnergyReport};
pub use error::{Error, Result};
pub use heuristic::{backward_rollout, forward_rollout, plan_preheat, PreheatPlan, Targets};
pub use model::{
    step_backward, step_forward, DriveCycle, PowerBreakdown, State, StepInputs, VehicleParams,
};
pub use trajectory::{simulate, Origin, Trajectory};
