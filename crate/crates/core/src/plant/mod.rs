//! Deterministic device and geometry models of the receiver.
//!
//! The plant maps actuator angles and disturbances to centroid positions at
//! the focal plane ([`optics`]), reads the tracking centroid through a
//! four-anode position-sensitive detector ([`psd`]), and models the two
//! actuators: the fast steering mirror in the receiver ([`fsm`]) and the
//! hexapod under the remote reflector ([`hexapod`]).

pub mod fsm;
pub mod hexapod;
pub mod optics;
pub mod psd;

use thiserror::Error;

pub use fsm::{fsm_step, FsmParams, FsmState};
pub use hexapod::{hexapod_step, HexapodParams, HexapodState};
pub use optics::{beam_centroids, coupling_efficiency, BeamCentroids, CouplingModel, OpticsGeometry};
pub use psd::{psd_position, psd_voltages, AnodeVoltages, PsdModel, SpotPosition};

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    /// The anode sum is not positive; the spot cannot be located.
    #[error("degenerate PSD reading: anode sum {sum} V")]
    DegenerateReading { sum: f64 },
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
