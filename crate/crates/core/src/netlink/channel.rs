use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BridgeMessage, MessageKind, NetlinkError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Lower bound of the uniform delivery delay, s.
    pub latency_min_s: f64,
    /// Upper bound of the uniform delivery delay, s.
    pub latency_max_s: f64,
    /// Independent loss probability per message.
    pub drop_prob: f64,
    /// Time the station waits for an ack before retransmitting, s.
    pub ack_timeout_s: f64,
    /// Retransmissions allowed after the first attempt.
    pub max_retries: u32,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            latency_min_s: 0.005,
            latency_max_s: 0.05,
            drop_prob: 0.01,
            ack_timeout_s: 0.2,
            max_retries: 5,
        }
    }
}

impl ChannelParams {
    /// Instant, lossless delivery.
    pub fn ideal() -> Self {
        Self {
            latency_min_s: 0.0,
            latency_max_s: 0.0,
            drop_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NetlinkError> {
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(NetlinkError::InvalidParameter(format!(
                "drop_prob must be in [0, 1), got {}",
                self.drop_prob
            )));
        }
        if !(self.latency_min_s.is_finite()
            && self.latency_max_s.is_finite()
            && 0.0 <= self.latency_min_s
            && self.latency_min_s <= self.latency_max_s)
        {
            return Err(NetlinkError::InvalidParameter(
                "latency bounds must satisfy 0 ≤ min ≤ max".into(),
            ));
        }
        if !(self.ack_timeout_s.is_finite() && self.ack_timeout_s > 0.0) {
            return Err(NetlinkError::InvalidParameter("ack timeout must be > 0".into()));
        }
        Ok(())
    }
}

/// Fate of one transmitted message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmission {
    Deliver { at: f64 },
    Dropped,
}

/// Decides what happens to each message put on the air.
pub trait Channel {
    fn transmit(&mut self, msg: &BridgeMessage) -> Transmission;
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn transmit(&mut self, msg: &BridgeMessage) -> Transmission {
        (**self).transmit(msg)
    }
}

/// Delivers `msg` at `sent_at + U(latency_min, latency_max)` with probability
/// `1 − drop_prob`.
///
/// `drop_prob = 1` is accepted here (it never delivers) even though a bridge
/// configuration rejects it.
pub fn send<R: Rng + ?Sized>(msg: &BridgeMessage, params: &ChannelParams, rng: &mut R) -> Transmission {
    let u: f64 = rng.random();
    if u < params.drop_prob {
        return Transmission::Dropped;
    }
    let v: f64 = rng.random();
    let latency = params.latency_min_s + (params.latency_max_s - params.latency_min_s) * v;
    Transmission::Deliver {
        at: msg.sent_at + latency,
    }
}

/// Random loss and latency drawn from [`ChannelParams`].
#[derive(Debug, Clone)]
pub struct LossyChannel<R> {
    pub params: ChannelParams,
    rng: R,
}

impl<R: Rng> LossyChannel<R> {
    pub fn new(params: ChannelParams, rng: R) -> Self {
        Self { params, rng }
    }
}

impl<R: Rng> Channel for LossyChannel<R> {
    fn transmit(&mut self, msg: &BridgeMessage) -> Transmission {
        send(msg, &self.params, &mut self.rng)
    }
}

/// Deterministic channel for protocol tests.
///
/// Each direction consumes its own script: `Some(latency)` delivers after
/// `latency` seconds, `None` drops. Once a script runs out, messages are
/// delivered after `default_latency`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChannel {
    pub requests: VecDeque<Option<f64>>,
    pub acks: VecDeque<Option<f64>>,
    pub default_latency: f64,
}

impl ScriptedChannel {
    pub fn new(requests: &[Option<f64>], acks: &[Option<f64>], default_latency: f64) -> Self {
        Self {
            requests: requests.iter().copied().collect(),
            acks: acks.iter().copied().collect(),
            default_latency,
        }
    }
}

impl Channel for ScriptedChannel {
    fn transmit(&mut self, msg: &BridgeMessage) -> Transmission {
        let script = match msg.kind {
            MessageKind::Ack => &mut self.acks,
            _ => &mut self.requests,
        };
        match script.pop_front().unwrap_or(Some(self.default_latency)) {
            Some(latency) => Transmission::Deliver {
                at: msg.sent_at + latency,
            },
            None => Transmission::Dropped,
        }
    }
}
