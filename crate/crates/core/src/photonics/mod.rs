//! Photon-pair source, link losses, and detectors.
//!
//! A periodically poled KTP crystal pumped at 405 nm emits signal/idler
//! pairs. The signal photon crosses the free-space link (static losses plus
//! the time-varying fiber coupling from the control loop); the idler is
//! detected locally. Both arms end in detectors with jitter, dead time and
//! uncorrelated background. Timestamps are integer picoseconds.

mod channel;
pub mod dispersion;
mod phase_matching;
mod source;
mod stream;

pub use channel::{
    apply_channel, apply_channel_block, calibrate_extra_loss, ChannelTally, DetectorCarry,
    DetectorParams, ExtraLossFit, LossBudget, TransmittanceTimeline,
};
pub use dispersion::DispersionModel;
pub use phase_matching::{
    calibrate_temp_offset, delta_k, idler_nm, phase_matched_wavelengths, tuning_curve,
    PhaseMatchParams, TuningPoint, DEFAULT_TEMP_OFFSET_C, DEGENERACY_SET_TEMP_C,
};
pub use source::{generate_pairs, PairGenerator, PairStreams, SpdcSourceParams};
pub use stream::{DetectorChannel, PhotonEventStream, HEADER_LEN, PS_PER_S};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhotonicsError {
    #[error("no phase-matched pair at {temp_c} °C")]
    NoPhaseMatch { temp_c: f64 },
    #[error("invalid photonics parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} stream is not strictly increasing")]
    UnsortedStream(DetectorChannel),
    #[error("malformed stream file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
