//! Two-level tracking control for a differential-drive robot.
//!
//! The outer level ([`tracking`]) turns the pose error against a reference
//! trajectory into body-velocity commands and monitors a Lyapunov function.
//! The inner level ([`velocity_loop`]) follows those commands on a simulated
//! DC-motor plant ([`plant`]) with PID feedback plus a neural feedforward
//! term ([`nn`]) learned online. [`harness`] wires both levels together and
//! runs experiments.
//!
//! Batch work (gain sweeps, sign scans, paired comparisons) runs on rayon
//! when the default `parallel` feature is enabled.

pub mod error;
pub mod exec;
pub mod harness;
pub mod kinematics;
pub mod nn;
pub mod plant;
pub mod tracking;
pub mod velocity_loop;

pub use error::{ConfigError, Error, Result};
pub use exec::Execution;
