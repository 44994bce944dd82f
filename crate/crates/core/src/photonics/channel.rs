use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{PhotonEventStream, PhotonicsError, PS_PER_S};

/// Static part of the link loss chain. Fiber coupling enters separately as
/// a time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossBudget {
    pub free_space_loss: f64,
    pub transceiver_loss: f64,
    /// Residual loss fitted so the receiver rate matches its reference.
    pub extra_loss: f64,
}

impl Default for LossBudget {
    fn default() -> Self {
        Self {
            free_space_loss: 0.16,
            transceiver_loss: 0.45,
            extra_loss: 0.0,
        }
    }
}

impl LossBudget {
    pub fn lossless() -> Self {
        Self {
            free_space_loss: 0.0,
            transceiver_loss: 0.0,
            extra_loss: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PhotonicsError> {
        let ok = [self.free_space_loss, self.transceiver_loss, self.extra_loss]
            .iter()
            .all(|l| (0.0..1.0).contains(l));
        if ok {
            Ok(())
        } else {
            Err(PhotonicsError::InvalidParameter("losses must be in [0, 1)".into()))
        }
    }

    /// Transmission of the static chain, excluding fiber coupling and
    /// detector efficiency.
    pub fn static_transmission(&self) -> f64 {
        (1.0 - self.free_space_loss) * (1.0 - self.transceiver_loss) * (1.0 - self.extra_loss)
    }

    /// Probability that a photon is detected given coupling `eta`.
    pub fn survival(&self, eta: f64, efficiency: f64) -> f64 {
        self.static_transmission() * eta * efficiency
    }
}

/// Fit of `extra_loss` so that `source_rate · survival = target_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraLossFit {
    /// Unconstrained solution; negative when the chain already loses more
    /// than the target allows.
    pub unclamped: f64,
    /// Value clamped to `[0, 1)` and used in the run.
    pub extra_loss: f64,
    /// Rate predicted with the clamped value, /s.
    pub predicted_rate: f64,
}

pub fn calibrate_extra_loss(
    source_rate: f64,
    target_rate: f64,
    mean_eta: f64,
    efficiency: f64,
    budget: &LossBudget,
) -> ExtraLossFit {
    let base = LossBudget {
        extra_loss: 0.0,
        ..*budget
    };
    let lossless_rate = source_rate * base.survival(mean_eta, efficiency);
    let unclamped = if lossless_rate > 0.0 {
        1.0 - target_rate / lossless_rate
    } else {
        0.0
    };
    let extra_loss = unclamped.clamp(0.0, 0.999);
    ExtraLossFit {
        unclamped,
        extra_loss,
        predicted_rate: lossless_rate * (1.0 - extra_loss),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    /// Gaussian timing jitter, standard deviation in ps.
    pub jitter_ps: f64,
    /// Non-paralyzable dead time, ns.
    pub dead_time_ns: f64,
    pub efficiency: f64,
    /// Uncorrelated counts (daylight plus dark counts), /s.
    pub background_rate: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            jitter_ps: 350.0,
            dead_time_ns: 22.0,
            efficiency: 0.6,
            background_rate: 5.5e5,
        }
    }
}

impl DetectorParams {
    /// A detector with no jitter, dead time, loss, or background.
    pub fn ideal() -> Self {
        Self {
            jitter_ps: 0.0,
            dead_time_ns: 0.0,
            efficiency: 1.0,
            background_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PhotonicsError> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if nonneg(self.jitter_ps)
            && nonneg(self.dead_time_ns)
            && (0.0..=1.0).contains(&self.efficiency)
            && nonneg(self.background_rate)
        {
            Ok(())
        } else {
            Err(PhotonicsError::InvalidParameter(
                "detector: jitter, dead time and background ≥ 0; efficiency in [0,1]".into(),
            ))
        }
    }

    fn dead_ps(&self) -> u64 {
        (self.dead_time_ns * 1e3).round() as u64
    }
}

/// Piecewise-constant coupling efficiency sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmittanceTimeline {
    pub start_s: f64,
    pub step_s: f64,
    pub values: Vec<f64>,
}

impl TransmittanceTimeline {
    pub fn constant(value: f64) -> Self {
        Self {
            start_s: 0.0,
            step_s: f64::INFINITY,
            values: vec![value],
        }
    }

    pub fn new(start_s: f64, step_s: f64, values: Vec<f64>) -> Result<Self, PhotonicsError> {
        if values.is_empty() || !(step_s > 0.0) || !start_s.is_finite() {
            return Err(PhotonicsError::InvalidParameter(
                "timeline needs values and a positive step".into(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(PhotonicsError::InvalidParameter("transmittance must be in [0,1]".into()));
        }
        Ok(Self {
            start_s,
            step_s,
            values,
        })
    }

    /// Value in force at `t_s`; clamped to the first and last samples.
    pub fn at(&self, t_s: f64) -> f64 {
        let k = ((t_s - self.start_s) / self.step_s).floor();
        let k = if k.is_finite() && k > 0.0 { k as usize } else { 0 };
        self.values[k.min(self.values.len() - 1)]
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.step_s * self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Dead-time state carried from one block to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectorCarry {
    pub last_click_ps: Option<u64>,
}

/// Counts from one pass through the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChannelTally {
    pub input: u64,
    /// Photons that survived the loss chain and detector efficiency.
    pub survived: u64,
    pub background: u64,
    pub dead_time_dropped: u64,
    /// Clicks from surviving photons after dead time.
    pub signal_clicks: u64,
    /// Clicks lost because two landed on the same picosecond.
    pub merged_duplicates: u64,
    /// All clicks in the output.
    pub clicks: u64,
}

impl ChannelTally {
    pub fn add(&mut self, other: &ChannelTally) {
        self.input += other.input;
        self.survived += other.survived;
        self.background += other.background;
        self.dead_time_dropped += other.dead_time_dropped;
        self.signal_clicks += other.signal_clicks;
        self.merged_duplicates += other.merged_duplicates;
        self.clicks += other.clicks;
    }
}

/// Passes the photons in `events` (all emitted in `[start_s, end_s)`)
/// through the link and detector, adding background over the same interval.
///
/// Order of effects: loss thinning, timing jitter, non-paralyzable dead time
/// on the surviving photons, then background appended as an independent
/// Poisson stream and re-sorted. Clicks are clamped into `[0, total_s]` and
/// returned strictly increasing.
#[allow(clippy::too_many_arguments)]
pub fn apply_channel_block<R: Rng>(
    events: &[u64],
    start_s: f64,
    end_s: f64,
    total_s: f64,
    budget: &LossBudget,
    eta: &TransmittanceTimeline,
    detector: &DetectorParams,
    carry: &mut DetectorCarry,
    rng: &mut R,
) -> Result<(Vec<u64>, ChannelTally), PhotonicsError> {
    budget.validate()?;
    detector.validate()?;
    let total_ps = (total_s * PS_PER_S).round() as u64;
    let static_t = budget.static_transmission() * detector.efficiency;
    let mut tally = ChannelTally {
        input: events.len() as u64,
        ..ChannelTally::default()
    };
    let mut photons: Vec<u64> = Vec::with_capacity(events.len() / 8);
    for &t in events {
        let p = static_t * eta.at(t as f64 / PS_PER_S);
        let u: f64 = rng.random();
        if u >= p {
            continue;
        }
        tally.survived += 1;
        let t = if detector.jitter_ps > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            (t as f64 + detector.jitter_ps * z).round().clamp(0.0, total_ps as f64) as u64
        } else {
            t
        };
        photons.push(t);
    }
    photons.sort_unstable();
    let dead = detector.dead_ps().max(1);
    let mut out = Vec::with_capacity(photons.len());
    for t in photons {
        if carry.last_click_ps.is_some_and(|last| t < last + dead) {
            tally.dead_time_dropped += 1;
            continue;
        }
        carry.last_click_ps = Some(t);
        out.push(t);
    }
    tally.signal_clicks = out.len() as u64;
    if detector.background_rate > 0.0 && end_s > start_s {
        let exp = Exp::new(detector.background_rate).expect("positive rate");
        let mut t = start_s + rng.sample(exp);
        while t < end_s {
            out.push((t * PS_PER_S).round() as u64);
            tally.background += 1;
            t += rng.sample(exp);
        }
        out.sort_unstable();
        let before = out.len();
        out.dedup();
        tally.merged_duplicates = (before - out.len()) as u64;
    }
    tally.clicks = out.len() as u64;
    Ok((out, tally))
}

/// Whole-stream form of [`apply_channel_block`].
pub fn apply_channel<R: Rng>(
    stream: &PhotonEventStream,
    budget: &LossBudget,
    eta: &TransmittanceTimeline,
    detector: &DetectorParams,
    rng: &mut R,
) -> Result<(PhotonEventStream, ChannelTally), PhotonicsError> {
    let mut carry = DetectorCarry::default();
    let (timestamps_ps, tally) = apply_channel_block(
        &stream.timestamps_ps,
        0.0,
        stream.duration_s,
        stream.duration_s,
        budget,
        eta,
        detector,
        &mut carry,
        rng,
    )?;
    Ok((
        PhotonEventStream {
            timestamps_ps,
            channel: stream.channel,
            duration_s: stream.duration_s,
        },
        tally,
    ))
}
