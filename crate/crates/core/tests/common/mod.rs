//! Independent reference implementations shared by the integration tests and
//! the acceptance binary.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use qfso::control::{pid_update, PidConfig, PidState};
use qfso::netlink::{Bridge, BridgeEvent, Channel, ChannelParams, MoveOutcome};
use qfso::photonics::{DetectorChannel, PhotonEventStream};
use qfso::Vec2;
use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Coincidence counts by the definition: every (signal, idler) pair, every
/// bin `[k·w − w/2, k·w + w/2)` tested separately.
pub fn brute_force_counts(signal: &[u64], idler: &[u64], w: u64, range: u64) -> Vec<u64> {
    let k_max = (range / w) as i128;
    let w = w as i128;
    let mut counts = vec![0u64; (2 * k_max + 1) as usize];
    for &s in signal {
        for &i in idler {
            let d2 = 2 * (i as i128 - s as i128);
            if d2.abs() > (2 * k_max + 1) * w {
                continue;
            }
            for k in -k_max..=k_max {
                if 2 * k * w - w <= d2 && d2 < 2 * k * w + w {
                    counts[(k + k_max) as usize] += 1;
                }
            }
        }
    }
    counts
}

/// `n` distinct sorted timestamps drawn uniformly from `[0, span_ps)`.
pub fn uniform_timestamps<R: Rng>(rng: &mut R, n: usize, span_ps: u64) -> Vec<u64> {
    let mut t: Vec<u64> = (0..n).map(|_| rng.random_range(0..span_ps)).collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// Homogeneous Poisson arrivals at `rate` per second over `duration_s`,
/// rounded to ps and forced strictly increasing.
pub fn poisson_timestamps<R: Rng>(rng: &mut R, rate: f64, duration_s: f64) -> Vec<u64> {
    let exp = Exp::new(rate).unwrap();
    let mut out = Vec::new();
    let mut t = exp.sample(rng);
    let mut last: Option<u64> = None;
    while t < duration_s {
        let mut ps = (t * 1e12).round() as u64;
        if let Some(l) = last {
            ps = ps.max(l + 1);
        }
        out.push(ps);
        last = Some(ps);
        t += exp.sample(rng);
    }
    out
}

pub fn stream(channel: DetectorChannel, timestamps_ps: Vec<u64>, duration_s: f64) -> PhotonEventStream {
    PhotonEventStream {
        timestamps_ps,
        channel,
        duration_s,
    }
}

/// One axis of the PID controller written out as a plain recurrence.
#[derive(Debug, Clone, Copy, Default)]
pub struct PidOracle {
    integrator: f64,
    filtered: f64,
    primed: bool,
}

impl PidOracle {
    pub fn step(&mut self, e: f64, dt: f64, cfg: &PidConfig) -> f64 {
        let lim = cfg.integrator_limit_urad;
        self.integrator = (self.integrator + e * (cfg.ki * dt)).clamp(-lim, lim);
        let derivative = if self.primed {
            let alpha = 1.0 - (-2.0 * PI * cfg.derivative_filter_hz * dt).exp();
            let f = self.filtered + (e - self.filtered) * alpha;
            let d = (f - self.filtered) / dt;
            self.filtered = f;
            d
        } else {
            self.filtered = e;
            0.0
        };
        self.primed = true;
        let out = e * cfg.kp + self.integrator + derivative * cfg.kd;
        out.clamp(-cfg.output_limit_urad, cfg.output_limit_urad)
    }
}

/// Runs `pid_update` and two scalar oracles over `errors`; returns the number
/// of steps whose command or integrator differ in any bit.
pub fn pid_mismatches(errors: &[Vec2], dt: f64, cfg: &PidConfig) -> usize {
    let mut state = PidState::default();
    let (mut ox, mut oy) = (PidOracle::default(), PidOracle::default());
    let mut bad = 0;
    for &e in errors {
        let (u, next) = pid_update(&state, e, dt, cfg).unwrap();
        let (ux, uy) = (ox.step(e.x, dt, cfg), oy.step(e.y, dt, cfg));
        if u.x.to_bits() != ux.to_bits()
            || u.y.to_bits() != uy.to_bits()
            || next.integrator.x.to_bits() != ox.integrator.to_bits()
            || next.integrator.y.to_bits() != oy.integrator.to_bits()
        {
            bad += 1;
        }
        state = next;
    }
    bad
}

/// Kolmogorov-Smirnov distance between `samples` and Exp(rate).
pub fn ks_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in samples.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    d
}

/// Asymptotic KS critical value at α = 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// What happened across a sequence of moves sent over one bridge.
#[derive(Debug, Default)]
pub struct ProtocolRun {
    /// Applications seen at the reflector, by sequence number.
    pub applications: HashMap<u64, u32>,
    pub outcomes: Vec<MoveOutcome>,
    /// Sum of every applied delta.
    pub applied_total: Vec2,
    /// Copies the reflector recognized and did not apply.
    pub duplicates: u64,
}

impl ProtocolRun {
    /// Each seq applied at most once, and every `Applied` outcome applied
    /// exactly once.
    pub fn at_most_once(&self) -> bool {
        let dup = self.applications.values().any(|&n| n > 1);
        let acked_missing = self.outcomes.iter().any(|o| match o {
            MoveOutcome::Applied { seq, .. } => self.applications.get(seq) != Some(&1),
            MoveOutcome::Failed { .. } => false,
        });
        !dup && !acked_missing
    }

    pub fn failed(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, MoveOutcome::Failed { .. }))
            .count()
    }
}

/// Sends `deltas` one after another, each as soon as the previous outcome is
/// known, then drains stragglers. Applications are counted per sequence
/// number from the raw event stream.
pub fn run_moves<C: Channel>(channel: C, params: ChannelParams, deltas: &[Vec2]) -> ProtocolRun {
    let mut bridge = Bridge::new(channel, params);
    let mut run = ProtocolRun::default();
    let mut now = 0.0f64;
    let record = |events: Vec<BridgeEvent>, run: &mut ProtocolRun| -> Option<MoveOutcome> {
        let mut outcome = None;
        for ev in events {
            match ev {
                BridgeEvent::Applied { seq, delta, .. } => {
                    *run.applications.entry(seq).or_default() += 1;
                    run.applied_total += delta;
                }
                BridgeEvent::Completed { seq, attempts, at } => {
                    outcome = Some(MoveOutcome::Applied { seq, attempts, at })
                }
                BridgeEvent::Failed { seq, attempts, at } => {
                    outcome = Some(MoveOutcome::Failed { seq, attempts, at })
                }
                _ => {}
            }
        }
        outcome
    };
    for &d in deltas {
        bridge.request_move(d, now).unwrap();
        let mut t = now;
        let out = loop {
            if let Some(o) = record(bridge.advance(t), &mut run) {
                break o;
            }
            t = bridge.next_event_time().expect("outstanding request has a deadline");
        };
        now = match out {
            MoveOutcome::Applied { at, .. } | MoveOutcome::Failed { at, .. } => at,
        };
        run.outcomes.push(out);
    }
    while let Some(t) = bridge.next_event_time() {
        record(bridge.advance(t), &mut run);
    }
    run.duplicates = bridge.stats().duplicates_suppressed;
    run
}
