use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    MoveRequest,
    Ack,
    Telemetry,
}

/// One bridge message. `payload` is the requested tilt change in μrad for a
/// `MoveRequest` and zero otherwise; an `Ack` echoes the sequence number it
/// acknowledges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeMessage {
    pub seq: u64,
    pub kind: MessageKind,
    pub payload: Vec2,
    pub sent_at: f64,
}

/// Wire form: one JSON object per line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMessage {
    seq: u64,
    kind: MessageKind,
    dx_urad: f64,
    dy_urad: f64,
    sent_at_s: f64,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed message line: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("non-finite field in message")]
    NonFinite,
}

impl BridgeMessage {
    pub fn move_request(seq: u64, delta: Vec2, sent_at: f64) -> Self {
        Self {
            seq,
            kind: MessageKind::MoveRequest,
            payload: delta,
            sent_at,
        }
    }

    pub fn ack(seq: u64, sent_at: f64) -> Self {
        Self {
            seq,
            kind: MessageKind::Ack,
            payload: Vec2::ZERO,
            sent_at,
        }
    }

    /// Serializes to a single line (no trailing newline).
    pub fn to_line(&self) -> String {
        let wire = WireMessage {
            seq: self.seq,
            kind: self.kind,
            dx_urad: self.payload.x,
            dy_urad: self.payload.y,
            sent_at_s: self.sent_at,
        };
        serde_json::to_string(&wire).expect("wire message serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, WireError> {
        let wire: WireMessage = serde_json::from_str(line.trim())?;
        let msg = Self {
            seq: wire.seq,
            kind: wire.kind,
            payload: Vec2::new(wire.dx_urad, wire.dy_urad),
            sent_at: wire.sent_at_s,
        };
        if !msg.payload.is_finite() || !msg.sent_at.is_finite() {
            return Err(WireError::NonFinite);
        }
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_field_names() {
        let line = BridgeMessage::move_request(7, Vec2::new(-2.0, 0.5), 60.25).to_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["seq"], 7);
        assert_eq!(v["kind"], "MoveRequest");
        assert_eq!(v["dx_urad"], -2.0);
        assert_eq!(v["dy_urad"], 0.5);
        assert_eq!(v["sent_at_s"], 60.25);
        assert!(!line.contains('\n'));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(BridgeMessage::from_line("{\"seq\":1}").is_err());
        assert!(BridgeMessage::from_line("not json").is_err());
        let extra = r#"{"seq":1,"kind":"Ack","dx_urad":0,"dy_urad":0,"sent_at_s":0,"x":1}"#;
        assert!(BridgeMessage::from_line(extra).is_err());
    }
}
