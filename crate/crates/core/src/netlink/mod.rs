//! Wireless bridge between the receiver station and the remote reflector.
//!
//! Coarse-alignment moves travel as [`BridgeMessage`]s over a lossy,
//! delaying [`Channel`]. The station runs a stop-and-wait sender (one
//! outstanding request, retransmit on ack timeout); the reflector applies a
//! request only if its sequence number is new, so a move is never applied
//! twice however often it is retransmitted.
//!
//! [`Bridge`] is the in-simulation form, driven by a virtual clock. The
//! [`live`] module speaks the same protocol as JSON lines over a real socket.

mod bridge;
mod channel;
#[cfg(unix)]
pub mod live;
mod message;

pub use bridge::{reliable_move, Bridge, BridgeEvent, BridgeStats, MoveOutcome};
pub use channel::{send, Channel, ChannelParams, LossyChannel, ScriptedChannel, Transmission};
pub use message::{BridgeMessage, MessageKind, WireError};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetlinkError {
    #[error("a move request (seq {0}) is still outstanding")]
    Busy(u64),
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error("invalid channel parameters: {0}")]
    InvalidParameter(String),
}
