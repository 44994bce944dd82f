use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{BridgeMessage, Channel, ChannelParams, MessageKind, NetlinkError, Transmission};
use crate::vec2::Vec2;

/// Everything observable that happens on the bridge, in time order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BridgeEvent {
    /// The station put a move request on the air (`attempt` starts at 1).
    Transmitted { seq: u64, attempt: u32, at: f64 },
    /// A message was lost.
    Dropped { seq: u64, kind: MessageKind, at: f64 },
    /// The reflector accepted a new request; the hexapod must move by `delta`.
    Applied { seq: u64, delta: Vec2, at: f64 },
    /// The reflector saw a request it had already applied.
    DuplicateSuppressed { seq: u64, at: f64 },
    /// The station received the ack for its outstanding request.
    Completed { seq: u64, attempts: u32, at: f64 },
    /// Retries exhausted without an ack.
    Failed { seq: u64, attempts: u32, at: f64 },
}

impl BridgeEvent {
    pub fn at(&self) -> f64 {
        match *self {
            BridgeEvent::Transmitted { at, .. }
            | BridgeEvent::Dropped { at, .. }
            | BridgeEvent::Applied { at, .. }
            | BridgeEvent::DuplicateSuppressed { at, .. }
            | BridgeEvent::Completed { at, .. }
            | BridgeEvent::Failed { at, .. } => at,
        }
    }
}

/// Station-side result of one move request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveOutcome {
    Applied { seq: u64, attempts: u32, at: f64 },
    Failed { seq: u64, attempts: u32, at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BridgeStats {
    pub requests: u64,
    pub transmissions: u64,
    pub retransmissions: u64,
    pub drops: u64,
    pub applied: u64,
    pub duplicates_suppressed: u64,
    pub completed: u64,
    pub failed: u64,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    at: f64,
    order: u64,
    msg: BridgeMessage,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for InFlight {}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InFlight {
    // reversed: BinaryHeap pops the earliest delivery first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.order.cmp(&self.order))
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    request: BridgeMessage,
    attempts: u32,
    deadline: f64,
}

/// Stop-and-wait bridge on a virtual clock.
#[derive(Debug)]
pub struct Bridge<C> {
    channel: C,
    params: ChannelParams,
    next_seq: u64,
    pending: Option<Pending>,
    last_applied: Option<u64>,
    in_flight: BinaryHeap<InFlight>,
    order: u64,
    events: Vec<BridgeEvent>,
    stats: BridgeStats,
}

impl<C: Channel> Bridge<C> {
    /// `params` supplies the ack timeout and retry budget; loss and latency
    /// come from `channel`.
    pub fn new(channel: C, params: ChannelParams) -> Self {
        Self {
            channel,
            params,
            next_seq: 1,
            pending: None,
            last_applied: None,
            in_flight: BinaryHeap::new(),
            order: 0,
            events: Vec::new(),
            stats: BridgeStats::default(),
        }
    }

    pub fn stats(&self) -> BridgeStats {
        self.stats
    }

    pub fn is_busy(&self) -> bool {
        self.pending.is_some()
    }

    pub fn channel(&self) -> &C {
        &self.channel
    }

    /// Starts a new move request at time `now` and returns its sequence
    /// number.
    pub fn request_move(&mut self, delta: Vec2, now: f64) -> Result<u64, NetlinkError> {
        if let Some(p) = &self.pending {
            return Err(NetlinkError::Busy(p.request.seq));
        }
        if !delta.is_finite() || !now.is_finite() {
            return Err(NetlinkError::RejectedInput("non-finite move request".into()));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.stats.requests += 1;
        let request = BridgeMessage::move_request(seq, delta, now);
        self.pending = Some(Pending {
            request,
            attempts: 1,
            deadline: now + self.params.ack_timeout_s,
        });
        self.put_on_air(request, 1);
        Ok(seq)
    }

    /// Earliest time at which something is scheduled to happen.
    pub fn next_event_time(&self) -> Option<f64> {
        let msg = self.in_flight.peek().map(|f| f.at);
        let timeout = self.pending.map(|p| p.deadline);
        match (msg, timeout) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Processes everything scheduled at or before `now`. Deliveries win ties
    /// against ack timeouts.
    pub fn advance(&mut self, now: f64) -> Vec<BridgeEvent> {
        loop {
            let msg_at = self.in_flight.peek().map(|f| f.at).filter(|&t| t <= now);
            let timeout_at = self.pending.map(|p| p.deadline).filter(|&t| t <= now);
            match (msg_at, timeout_at) {
                (Some(m), Some(t)) if m <= t => self.deliver_next(),
                (Some(_), None) => self.deliver_next(),
                (_, Some(_)) => self.expire_pending(),
                (None, None) => break,
            }
        }
        std::mem::take(&mut self.events)
    }

    fn put_on_air(&mut self, msg: BridgeMessage, attempt: u32) {
        if msg.kind == MessageKind::MoveRequest {
            self.stats.transmissions += 1;
            if attempt > 1 {
                self.stats.retransmissions += 1;
            }
            self.events.push(BridgeEvent::Transmitted {
                seq: msg.seq,
                attempt,
                at: msg.sent_at,
            });
        }
        match self.channel.transmit(&msg) {
            Transmission::Deliver { at } => {
                self.order += 1;
                self.in_flight.push(InFlight {
                    at,
                    order: self.order,
                    msg,
                });
            }
            Transmission::Dropped => {
                self.stats.drops += 1;
                self.events.push(BridgeEvent::Dropped {
                    seq: msg.seq,
                    kind: msg.kind,
                    at: msg.sent_at,
                });
            }
        }
    }

    fn deliver_next(&mut self) {
        let Some(InFlight { at, msg, .. }) = self.in_flight.pop() else {
            return;
        };
        match msg.kind {
            MessageKind::MoveRequest => {
                if self.last_applied.is_none_or(|last| msg.seq > last) {
                    self.last_applied = Some(msg.seq);
                    self.stats.applied += 1;
                    self.events.push(BridgeEvent::Applied {
                        seq: msg.seq,
                        delta: msg.payload,
                        at,
                    });
                } else {
                    self.stats.duplicates_suppressed += 1;
                    self.events
                        .push(BridgeEvent::DuplicateSuppressed { seq: msg.seq, at });
                }
                // duplicates are acked too, so a lost ack does not stall the station
                self.put_on_air(BridgeMessage::ack(msg.seq, at), 0);
            }
            MessageKind::Ack => {
                if let Some(p) = self.pending.filter(|p| p.request.seq == msg.seq) {
                    self.pending = None;
                    self.stats.completed += 1;
                    self.events.push(BridgeEvent::Completed {
                        seq: msg.seq,
                        attempts: p.attempts,
                        at,
                    });
                }
            }
            MessageKind::Telemetry => {}
        }
    }

    fn expire_pending(&mut self) {
        let Some(mut p) = self.pending else {
            return;
        };
        if p.attempts > self.params.max_retries {
            self.pending = None;
            self.stats.failed += 1;
            self.events.push(BridgeEvent::Failed {
                seq: p.request.seq,
                attempts: p.attempts,
                at: p.deadline,
            });
            return;
        }
        let retry = BridgeMessage {
            sent_at: p.deadline,
            ..p.request
        };
        p.attempts += 1;
        p.deadline += self.params.ack_timeout_s;
        self.pending = Some(p);
        self.put_on_air(retry, p.attempts);
    }
}

/// Sends one move and runs the bridge clock until the station learns the
/// outcome. `apply` is called for every application at the reflector.
pub fn reliable_move<C: Channel>(
    bridge: &mut Bridge<C>,
    delta: Vec2,
    now: f64,
    mut apply: impl FnMut(Vec2),
) -> Result<MoveOutcome, NetlinkError> {
    let seq = bridge.request_move(delta, now)?;
    let mut t = now;
    loop {
        for event in bridge.advance(t) {
            match event {
                BridgeEvent::Applied { delta, .. } => apply(delta),
                BridgeEvent::Completed { seq: s, attempts, at } if s == seq => {
                    return Ok(MoveOutcome::Applied { seq, attempts, at })
                }
                BridgeEvent::Failed { seq: s, attempts, at } if s == seq => {
                    return Ok(MoveOutcome::Failed { seq, attempts, at })
                }
                _ => {}
            }
        }
        t = bridge
            .next_event_time()
            .expect("an outstanding request always has a deadline");
    }
}
