//! Two-tier beam correction.
//!
//! The fine tier is a PID loop from the sensor reading to the fast steering
//! mirror. The coarse tier averages the position the beam would have without
//! the mirror and, once per cadence, asks the remote reflector to take over
//! that offset so the mirror stays near the middle of its range.

mod closed_loop;
mod coarse;
mod pid;
mod trace;

pub use closed_loop::{
    run_closed_loop, CoarseEvent, CoarseStatus, Disturbances, HexapodLink, LoopConfig,
    LoopOutcome, LoopSetup, PlantConfig,
};
pub use coarse::{correction_for, window_mean, CoarseAligner, CoarseConfig, CoarseDecision};
pub use pid::{pid_update, PidConfig, PidState};
pub use trace::{TraceLog, TraceRow, TRACE_COLUMNS};

use thiserror::Error;

use crate::netlink::NetlinkError;
use crate::plant::PlantError;
use crate::turbulence::TurbulenceError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid control configuration: {0}")]
    InvalidConfig(String),
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Turbulence(#[from] TurbulenceError),
    #[error(transparent)]
    Netlink(#[from] NetlinkError),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
}
