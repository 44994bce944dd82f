use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DetectorChannel, PhotonEventStream, PhotonicsError, PS_PER_S};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdcSourceParams {
    /// Pair rate per mW of pump, /s/mW.
    pub pair_rate_per_mw: f64,
    pub pump_mw: f64,
    /// Signal singles rate at the source used as the loss-chain reference, /s.
    pub source_signal_rate: f64,
    /// Probability that the local idler arm delivers its photon to the
    /// idler detector. The generator emits every idler; the loss is applied
    /// on the idler channel.
    pub heralding_efficiency: f64,
    /// Standard deviation of the idler-minus-signal emission offset, ps.
    pub pair_time_jitter_ps: f64,
    pub pump_waist_um: f64,
    pub collection_waist_um: f64,
}

impl Default for SpdcSourceParams {
    fn default() -> Self {
        Self {
            pair_rate_per_mw: 3.0e5,
            pump_mw: 1.0e6 / 3.0e5,
            source_signal_rate: 1.0e6,
            heralding_efficiency: 1.0,
            pair_time_jitter_ps: 1.0,
            pump_waist_um: 44.0,
            collection_waist_um: 33.0,
        }
    }
}

impl SpdcSourceParams {
    pub fn validate(&self) -> Result<(), PhotonicsError> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if nonneg(self.pair_rate_per_mw)
            && nonneg(self.pump_mw)
            && nonneg(self.source_signal_rate)
            && (0.0..=1.0).contains(&self.heralding_efficiency)
            && nonneg(self.pair_time_jitter_ps)
            && nonneg(self.pump_waist_um)
            && nonneg(self.collection_waist_um)
        {
            Ok(())
        } else {
            Err(PhotonicsError::InvalidParameter(
                "source: rates and widths must be ≥ 0, heralding efficiency in [0,1]".into(),
            ))
        }
    }

    /// Mean pair emission rate, /s.
    pub fn pair_rate(&self) -> f64 {
        self.pair_rate_per_mw * self.pump_mw
    }
}

/// Signal and idler streams of one block of emitted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStreams {
    pub signal: PhotonEventStream,
    pub idler: PhotonEventStream,
    /// For each idler event, the index of its partner in `signal`.
    pub idler_partner: Vec<u32>,
}

/// Emits pairs block by block over `[0, duration_s]`. Emission is a
/// homogeneous Poisson process, so consecutive blocks concatenate into one
/// realization of the whole run.
#[derive(Debug)]
pub struct PairGenerator<'a, R> {
    source: SpdcSourceParams,
    duration_s: f64,
    next_emission_s: f64,
    exp: Option<Exp<f64>>,
    last_signal_ps: Option<u64>,
    rng: &'a mut R,
}

impl<'a, R: Rng> PairGenerator<'a, R> {
    pub fn new(source: SpdcSourceParams, duration_s: f64, rng: &'a mut R) -> Result<Self, PhotonicsError> {
        source.validate()?;
        if !(duration_s.is_finite() && duration_s >= 0.0) {
            return Err(PhotonicsError::InvalidParameter("duration must be ≥ 0".into()));
        }
        let rate = source.pair_rate();
        let exp = (rate > 0.0).then(|| Exp::new(rate).expect("positive rate"));
        let mut generator = Self {
            source,
            duration_s,
            next_emission_s: 0.0,
            exp,
            last_signal_ps: None,
            rng,
        };
        generator.next_emission_s = generator.draw_gap();
        Ok(generator)
    }

    fn draw_gap(&mut self) -> f64 {
        match &self.exp {
            Some(exp) => self.rng.sample(exp),
            None => f64::INFINITY,
        }
    }

    pub fn is_done(&self) -> bool {
        self.next_emission_s >= self.duration_s
    }

    /// Pairs emitted before `until_s` (capped at the duration) that have not
    /// been returned yet.
    pub fn block(&mut self, until_s: f64) -> PairStreams {
        let until_s = until_s.min(self.duration_s);
        let total_ps = (self.duration_s * PS_PER_S).round() as u64;
        let sigma = self.source.pair_time_jitter_ps;
        let mut signal = Vec::new();
        let mut idler: Vec<(u64, u32)> = Vec::new();
        while self.next_emission_s < until_s {
            let mut ts = (self.next_emission_s * PS_PER_S).round() as u64;
            if let Some(last) = self.last_signal_ps {
                if ts <= last {
                    ts = last + 1;
                }
            }
            self.last_signal_ps = Some(ts);
            let z: f64 = self.rng.sample(StandardNormal);
            let ti = (ts as f64 + sigma * z).round().clamp(0.0, total_ps as f64) as u64;
            idler.push((ti, signal.len() as u32));
            signal.push(ts);
            let gap = self.draw_gap();
            self.next_emission_s += gap;
        }
        idler.sort_unstable();
        for k in 1..idler.len() {
            if idler[k].0 <= idler[k - 1].0 {
                idler[k].0 = idler[k - 1].0 + 1;
            }
        }
        PairStreams {
            signal: PhotonEventStream {
                timestamps_ps: signal,
                channel: DetectorChannel::Signal,
                duration_s: self.duration_s,
            },
            idler: PhotonEventStream {
                timestamps_ps: idler.iter().map(|p| p.0).collect(),
                channel: DetectorChannel::Idler,
                duration_s: self.duration_s,
            },
            idler_partner: idler.iter().map(|p| p.1).collect(),
        }
    }
}

/// All pairs emitted in `duration_s` seconds.
pub fn generate_pairs<R: Rng>(
    duration_s: f64,
    source: &SpdcSourceParams,
    rng: &mut R,
) -> Result<PairStreams, PhotonicsError> {
    let mut generator = PairGenerator::new(*source, duration_s, rng)?;
    Ok(generator.block(duration_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn zero_duration_is_empty() {
        let mut rng = stream_rng(1, Stream::PairEmission);
        let p = generate_pairs(0.0, &SpdcSourceParams::default(), &mut rng).unwrap();
        assert!(p.signal.is_empty() && p.idler.is_empty());
    }

    #[test]
    fn partners_line_up() {
        let mut rng = stream_rng(2, Stream::PairEmission);
        let src = SpdcSourceParams {
            pair_time_jitter_ps: 3.0,
            ..SpdcSourceParams::default()
        };
        let p = generate_pairs(0.01, &src, &mut rng).unwrap();
        assert_eq!(p.signal.len(), p.idler.len());
        p.signal.validate().unwrap();
        p.idler.validate().unwrap();
        for (k, &j) in p.idler_partner.iter().enumerate() {
            let d = p.idler.timestamps_ps[k] as i64 - p.signal.timestamps_ps[j as usize] as i64;
            assert!(d.abs() < 40, "{d}");
        }
    }

    #[test]
    fn blocks_concatenate() {
        let src = SpdcSourceParams::default();
        let mut rng = stream_rng(3, Stream::PairEmission);
        let whole = generate_pairs(0.02, &src, &mut rng).unwrap();
        let mut rng = stream_rng(3, Stream::PairEmission);
        let mut g = PairGenerator::new(src, 0.02, &mut rng).unwrap();
        let mut sig = g.block(0.005).signal.timestamps_ps;
        sig.extend(g.block(0.02).signal.timestamps_ps);
        assert!(g.is_done());
        assert_eq!(sig, whole.signal.timestamps_ps);
    }
}
