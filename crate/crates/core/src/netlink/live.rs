//! The bridge protocol over a real byte stream, one JSON message per line.

use std::io::{self, BufRead, BufReader, Write};
use std::os::unix::net::UnixStream;
use std::time::{Duration, Instant};

use super::{BridgeMessage, ChannelParams, MessageKind, MoveOutcome};
use crate::vec2::Vec2;

/// Sending side. Blocks on each move until it is acked or retries run out.
#[derive(Debug)]
pub struct LiveStation {
    reader: BufReader<UnixStream>,
    writer: UnixStream,
    params: ChannelParams,
    next_seq: u64,
    started: Instant,
    partial: String,
}

impl LiveStation {
    pub fn new(stream: UnixStream, params: ChannelParams) -> io::Result<Self> {
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            params,
            next_seq: 1,
            started: Instant::now(),
            partial: String::new(),
        })
    }

    pub fn move_blocking(&mut self, delta: Vec2) -> io::Result<MoveOutcome> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let timeout = Duration::from_secs_f64(self.params.ack_timeout_s);
        let total = self.params.max_retries + 1;
        for attempt in 1..=total {
            let now = self.started.elapsed().as_secs_f64();
            let line = BridgeMessage::move_request(seq, delta, now).to_line();
            writeln!(self.writer, "{line}")?;
            let deadline = Instant::now() + timeout;
            if self.await_ack(seq, deadline)? {
                return Ok(MoveOutcome::Applied {
                    seq,
                    attempts: attempt,
                    at: self.started.elapsed().as_secs_f64(),
                });
            }
        }
        Ok(MoveOutcome::Failed {
            seq,
            attempts: total,
            at: self.started.elapsed().as_secs_f64(),
        })
    }

    fn await_ack(&mut self, seq: u64, deadline: Instant) -> io::Result<bool> {
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(false);
            }
            self.reader.get_ref().set_read_timeout(Some(left))?;
            match self.reader.read_line(&mut self.partial) {
                Ok(0) => {
                    return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "reflector hung up"))
                }
                Ok(_) => {
                    let line = std::mem::take(&mut self.partial);
                    // unparseable lines are treated like corrupted packets
                    if let Ok(msg) = BridgeMessage::from_line(&line) {
                        if msg.kind == MessageKind::Ack && msg.seq == seq {
                            return Ok(true);
                        }
                    }
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Ok(false)
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Counters kept by [`serve_reflector`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReflectorStats {
    pub received: u64,
    pub dropped: u64,
    pub applied: u64,
    pub duplicates_suppressed: u64,
}

/// Reflector loop: runs until the peer closes the stream.
///
/// `drop_inbound` sees every parsed message first and may discard it to
/// emulate loss. New sequence numbers are passed to `apply`; every request
/// that survives, duplicate or not, is acked.
pub fn serve_reflector(
    stream: UnixStream,
    mut drop_inbound: impl FnMut(&BridgeMessage) -> bool,
    mut apply: impl FnMut(Vec2),
) -> io::Result<ReflectorStats> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let started = Instant::now();
    let mut last_applied: Option<u64> = None;
    let mut stats = ReflectorStats::default();
    for line in reader.lines() {
        let line = line?;
        let Ok(msg) = BridgeMessage::from_line(&line) else {
            continue;
        };
        if msg.kind != MessageKind::MoveRequest {
            continue;
        }
        stats.received += 1;
        if drop_inbound(&msg) {
            stats.dropped += 1;
            continue;
        }
        if last_applied.is_none_or(|last| msg.seq > last) {
            last_applied = Some(msg.seq);
            stats.applied += 1;
            apply(msg.payload);
        } else {
            stats.duplicates_suppressed += 1;
        }
        let ack = BridgeMessage::ack(msg.seq, started.elapsed().as_secs_f64());
        writeln!(writer, "{}", ack.to_line())?;
    }
    Ok(stats)
}
