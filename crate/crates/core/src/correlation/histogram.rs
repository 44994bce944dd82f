use std::io::Write;

use serde::Serialize;

use super::CorrelationError;
use crate::photonics::PhotonEventStream;

/// Coincidence counts against signal-to-idler delay, with optional
/// normalization.
///
/// Bin `k ∈ [−K, K]` is centered on `τ = k·w` and covers
/// `[k·w − w/2, k·w + w/2)`, where `τ = t_idler − t_signal`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Histogram {
    pub bin_width_ps: u64,
    /// `K·w`: center of the outermost bin.
    pub tau_range_ps: u64,
    pub counts: Vec<u64>,
    pub singles_rate_signal: f64,
    pub singles_rate_idler: f64,
    pub duration_s: f64,
    pub g2: Option<Vec<f64>>,
    pub g2_subtracted: Option<Vec<f64>>,
    /// Accidental floor removed by [`subtract_accidentals`].
    pub floor: Option<f64>,
}

impl G2Histogram {
    pub fn half_bins(&self) -> usize {
        (self.tau_range_ps / self.bin_width_ps) as usize
    }

    pub fn tau_ps(&self, bin: usize) -> i64 {
        (bin as i64 - self.half_bins() as i64) * self.bin_width_ps as i64
    }

    pub fn taus_ps(&self) -> Vec<i64> {
        (0..self.counts.len()).map(|b| self.tau_ps(b)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts expected per bin from uncorrelated singles alone.
    pub fn accidental_level(&self) -> f64 {
        self.singles_rate_signal
            * self.singles_rate_idler
            * (self.bin_width_ps as f64 * 1e-12)
            * self.duration_s
    }

    /// Largest value and its delay, from the subtracted series if present,
    /// else the raw one.
    pub fn peak(&self) -> Option<(i64, f64)> {
        let values = self.g2_subtracted.as_ref().or(self.g2.as_ref())?;
        let (bin, &v) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        Some((self.tau_ps(bin), v))
    }

    pub fn raw_peak(&self) -> Option<(i64, f64)> {
        let values = self.g2.as_ref()?;
        let (bin, &v) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        Some((self.tau_ps(bin), v))
    }

    /// Columns `tau_ps, counts, g2, g2_subtracted`; missing values are
    /// written as `NaN`. Metadata goes in leading `#` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# bin_width_ps={}", self.bin_width_ps)?;
        writeln!(w, "# tau_range_ps={}", self.tau_range_ps)?;
        writeln!(w, "# duration_s={}", self.duration_s)?;
        writeln!(w, "# singles_rate_signal={}", self.singles_rate_signal)?;
        writeln!(w, "# singles_rate_idler={}", self.singles_rate_idler)?;
        if let Some(floor) = self.floor {
            writeln!(w, "# floor={floor}")?;
        }
        writeln!(w, "tau_ps,counts,g2,g2_subtracted")?;
        for b in 0..self.counts.len() {
            let g = self.g2.as_ref().map_or(f64::NAN, |v| v[b]);
            let gs = self.g2_subtracted.as_ref().map_or(f64::NAN, |v| v[b]);
            writeln!(w, "{},{},{},{}", self.tau_ps(b), self.counts[b], g, gs)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII")
    }

    pub fn read_csv(text: &str) -> Result<Self, CorrelationError> {
        let bad = |msg: String| CorrelationError::Format(msg);
        let mut meta = std::collections::HashMap::new();
        let mut rows: Vec<(i64, u64, f64, f64)> = Vec::new();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(m) = line.strip_prefix('#') {
                if let Some((k, v)) = m.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header {
                if line != "tau_ps,counts,g2,g2_subtracted" {
                    return Err(bad(format!("line {}: unexpected header {line:?}", i + 1)));
                }
                header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", i + 1)));
            }
            let num = |s: &str| -> Result<f64, CorrelationError> {
                s.parse().map_err(|_| bad(format!("line {}: bad number {s:?}", i + 1)))
            };
            let tau: i64 = f[0].parse().map_err(|_| bad(format!("line {}: bad tau", i + 1)))?;
            let counts: u64 = f[1].parse().map_err(|_| bad(format!("line {}: bad count", i + 1)))?;
            rows.push((tau, counts, num(f[2])?, num(f[3])?));
        }
        if rows.len() < 2 {
            return Err(bad("histogram needs at least two rows".into()));
        }
        let width = (rows[1].0 - rows[0].0).unsigned_abs();
        let range = rows.last().expect("non-empty").0.unsigned_abs();
        if width == 0 || rows.windows(2).any(|p| (p[1].0 - p[0].0) as u64 != width) {
            return Err(bad("tau column must be evenly spaced and increasing".into()));
        }
        let get = |k: &str| -> Result<f64, CorrelationError> {
            meta.get(k)
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad metadata {k}"))))
                .transpose()
                .map(|v| v.unwrap_or(f64::NAN))
        };
        let column = |sel: fn(&(i64, u64, f64, f64)) -> f64| -> Option<Vec<f64>> {
            let v: Vec<f64> = rows.iter().map(sel).collect();
            (!v.iter().all(|x| x.is_nan())).then_some(v)
        };
        let floor = get("floor")?;
        Ok(Self {
            bin_width_ps: width,
            tau_range_ps: range,
            counts: rows.iter().map(|r| r.1).collect(),
            singles_rate_signal: get("singles_rate_signal")?,
            singles_rate_idler: get("singles_rate_idler")?,
            duration_s: get("duration_s")?,
            g2: column(|r| r.2),
            g2_subtracted: column(|r| r.3),
            floor: (!floor.is_nan()).then_some(floor),
        })
    }
}

/// Counts of (signal, idler) pairs by delay, using a sliding window over the
/// idler stream: O(N + M + C) for C counted pairs.
pub fn coincidence_histogram(
    signal: &PhotonEventStream,
    idler: &PhotonEventStream,
    bin_width_ps: u64,
    tau_range_ps: u64,
) -> Result<G2Histogram, CorrelationError> {
    if bin_width_ps == 0 {
        return Err(CorrelationError::Rejected("bin width must be > 0".into()));
    }
    if tau_range_ps % bin_width_ps != 0 {
        return Err(CorrelationError::Rejected(format!(
            "range {tau_range_ps} ps is not a multiple of the bin width {bin_width_ps} ps"
        )));
    }
    for s in [signal, idler] {
        if !s.is_strictly_increasing() {
            return Err(CorrelationError::Rejected(format!("{} stream is not sorted", s.channel)));
        }
    }
    if (signal.duration_s - idler.duration_s).abs() > 1e-12 * signal.duration_s.max(1.0) {
        return Err(CorrelationError::Rejected(
            "signal and idler streams must share one duration".into(),
        ));
    }
    let w = bin_width_ps as i64;
    let k = (tau_range_ps / bin_width_ps) as i64;
    // in units of half-picoseconds: 2τ ∈ [−(2K+1)w, (2K+1)w)
    let edge = (2 * k + 1) * w;
    let mut counts = vec![0u64; (2 * k + 1) as usize];
    let ids = &idler.timestamps_ps;
    let mut start = 0usize;
    for &ts in &signal.timestamps_ps {
        let ts = ts as i64;
        while start < ids.len() && 2 * (ids[start] as i64 - ts) < -edge {
            start += 1;
        }
        let mut j = start;
        while j < ids.len() {
            let d2 = 2 * (ids[j] as i64 - ts);
            if d2 >= edge {
                break;
            }
            let bin = (d2 + w).div_euclid(2 * w) + k;
            counts[bin as usize] += 1;
            j += 1;
        }
    }
    Ok(G2Histogram {
        bin_width_ps,
        tau_range_ps,
        counts,
        singles_rate_signal: signal.rate(),
        singles_rate_idler: idler.rate(),
        duration_s: signal.duration_s,
        g2: None,
        g2_subtracted: None,
        floor: None,
    })
}

/// `g²(τ) = counts / (r_s · r_i · w · T)` with the measured singles rates.
pub fn g2_normalize(hist: &G2Histogram) -> Result<G2Histogram, CorrelationError> {
    let denom = hist.accidental_level();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(CorrelationError::UndefinedNormalization);
    }
    Ok(G2Histogram {
        g2: Some(hist.counts.iter().map(|&c| c as f64 / denom).collect()),
        g2_subtracted: None,
        floor: None,
        ..hist.clone()
    })
}

/// Removes the accidental floor, estimated as the mean over bins with
/// `|τ| > far_from_ps`. Works on the already-subtracted series when there is
/// one, so repeated application is stable.
pub fn subtract_accidentals(hist: &G2Histogram, far_from_ps: u64) -> Result<G2Histogram, CorrelationError> {
    let values = hist
        .g2_subtracted
        .as_ref()
        .or(hist.g2.as_ref())
        .ok_or(CorrelationError::Rejected("histogram is not normalized".into()))?;
    let far: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(b, _)| hist.tau_ps(*b).unsigned_abs() > far_from_ps)
        .map(|(_, &v)| v)
        .collect();
    if far.len() < 2 {
        return Err(CorrelationError::NoFlatRegion {
            far_from_ps,
            tau_range_ps: hist.tau_range_ps,
        });
    }
    let floor = far.iter().sum::<f64>() / far.len() as f64;
    Ok(G2Histogram {
        g2_subtracted: Some(values.iter().map(|v| v - floor).collect()),
        floor: Some(hist.floor.unwrap_or(0.0) + floor),
        ..hist.clone()
    })
}

/// Mean and standard error of the series over `|τ| > far_from_ps`.
pub fn far_region_stats(values: &[f64], hist: &G2Histogram, far_from_ps: u64) -> Option<(f64, f64)> {
    let far: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(b, _)| hist.tau_ps(*b).unsigned_abs() > far_from_ps)
        .map(|(_, &v)| v)
        .collect();
    if far.len() < 2 {
        return None;
    }
    let n = far.len() as f64;
    let m = far.iter().sum::<f64>() / n;
    let var = far.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    Some((m, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::DetectorChannel;

    fn stream(ts: &[u64], channel: DetectorChannel) -> PhotonEventStream {
        PhotonEventStream {
            timestamps_ps: ts.to_vec(),
            channel,
            duration_s: 1e-6,
        }
    }

    #[test]
    fn single_pair_lands_in_center() {
        let h = coincidence_histogram(
            &stream(&[0], DetectorChannel::Signal),
            &stream(&[0], DetectorChannel::Idler),
            10,
            50,
        )
        .unwrap();
        assert_eq!(h.counts.len(), 11);
        assert_eq!(h.counts[5], 1);
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn bin_edges_are_half_open() {
        let s = stream(&[1000], DetectorChannel::Signal);
        // w = 10: bin 0 is [−5, 5), bin 1 is [5, 15)
        let i = stream(&[995, 1004, 1005, 1054, 1055], DetectorChannel::Idler);
        let h = coincidence_histogram(&s, &i, 10, 50).unwrap();
        assert_eq!(h.counts[5], 2);
        assert_eq!(h.counts[6], 1);
        assert_eq!(h.counts[10], 1);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn odd_bin_width() {
        let s = stream(&[100], DetectorChannel::Signal);
        // w = 3: bin 0 is [−1.5, 1.5) → integer delays −1, 0, 1
        let i = stream(&[98, 99, 100, 101, 102], DetectorChannel::Idler);
        let h = coincidence_histogram(&s, &i, 3, 3).unwrap();
        assert_eq!(h.counts, vec![1, 3, 1]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = stream(&[0], DetectorChannel::Signal);
        assert!(coincidence_histogram(&s, &s, 0, 10).is_err());
        assert!(coincidence_histogram(&s, &s, 3, 10).is_err());
        let unsorted = stream(&[5, 1], DetectorChannel::Idler);
        assert!(coincidence_histogram(&s, &unsorted, 1, 10).is_err());
    }

    #[test]
    fn flat_histogram_subtracts_to_zero() {
        let h = G2Histogram {
            bin_width_ps: 100,
            tau_range_ps: 1000,
            counts: vec![5; 21],
            singles_rate_signal: 1.0,
            singles_rate_idler: 1.0,
            duration_s: 1.0,
            g2: Some(vec![1.0; 21]),
            g2_subtracted: None,
            floor: None,
        };
        let s = subtract_accidentals(&h, 500).unwrap();
        assert!(s.g2_subtracted.unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(
            subtract_accidentals(&h, 1000),
            Err(CorrelationError::NoFlatRegion { .. })
        ));
    }

    #[test]
    fn zero_rates_are_undefined() {
        let h = coincidence_histogram(
            &stream(&[], DetectorChannel::Signal),
            &stream(&[], DetectorChannel::Idler),
            10,
            10,
        )
        .unwrap();
        assert!(matches!(g2_normalize(&h), Err(CorrelationError::UndefinedNormalization)));
    }

    #[test]
    fn csv_roundtrip() {
        let s = stream(&[0, 100, 200], DetectorChannel::Signal);
        let i = stream(&[10, 90, 250], DetectorChannel::Idler);
        let h = coincidence_histogram(&s, &i, 20, 200).unwrap();
        let h = subtract_accidentals(&g2_normalize(&h).unwrap(), 100).unwrap();
        let back = G2Histogram::read_csv(&h.to_csv_string()).unwrap();
        assert_eq!(back, h);
    }
}
