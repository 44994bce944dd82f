use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::PhotonicsError;

const MAGIC: &[u8; 4] = b"QFSO";
const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

pub const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorChannel {
    Signal,
    Idler,
}

impl DetectorChannel {
    pub fn id(self) -> u16 {
        match self {
            DetectorChannel::Signal => 0,
            DetectorChannel::Idler => 1,
        }
    }

    pub fn from_id(id: u16) -> Option<Self> {
        match id {
            0 => Some(DetectorChannel::Signal),
            1 => Some(DetectorChannel::Idler),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorChannel::Signal => "signal",
            DetectorChannel::Idler => "idler",
        })
    }
}

impl FromStr for DetectorChannel {
    type Err = PhotonicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signal" => Ok(DetectorChannel::Signal),
            "idler" => Ok(DetectorChannel::Idler),
            other => Err(PhotonicsError::Format(format!("unknown channel {other:?}"))),
        }
    }
}

/// Photon arrival times on one channel, integer picoseconds, strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonEventStream {
    pub timestamps_ps: Vec<u64>,
    pub channel: DetectorChannel,
    pub duration_s: f64,
}

impl PhotonEventStream {
    pub fn new(channel: DetectorChannel, duration_s: f64) -> Self {
        Self {
            timestamps_ps: Vec::new(),
            channel,
            duration_s,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ps.is_empty()
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration_s * PS_PER_S).round() as u64
    }

    /// Events per second over the stream duration.
    pub fn rate(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.len() as f64 / self.duration_s
        } else {
            0.0
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.timestamps_ps.windows(2).all(|w| w[0] < w[1])
    }

    pub fn validate(&self) -> Result<(), PhotonicsError> {
        if !self.is_strictly_increasing() {
            return Err(PhotonicsError::UnsortedStream(self.channel));
        }
        if self.timestamps_ps.last().is_some_and(|&t| t > self.duration_ps()) {
            return Err(PhotonicsError::Format(format!(
                "{} stream has events after its duration",
                self.channel
            )));
        }
        Ok(())
    }

    /// Binary form: `QFSO`, version (u16), channel id (u16), count (u64),
    /// then one u64 per event, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.channel.id().to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.len());
        for t in &self.timestamps_ps {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Reads the binary form. The format carries no duration; it is taken
    /// from `duration_s` when given, else from the last timestamp.
    pub fn read_binary<R: Read>(mut r: R, duration_s: Option<f64>) -> Result<Self, PhotonicsError> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| PhotonicsError::Format("truncated header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(PhotonicsError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FORMAT_VERSION {
            return Err(PhotonicsError::Format(format!("unsupported version {version}")));
        }
        let channel = DetectorChannel::from_id(u16::from_le_bytes([header[6], header[7]]))
            .ok_or_else(|| PhotonicsError::Format("bad channel id".into()))?;
        let count = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() as u64 != count * 8 {
            return Err(PhotonicsError::Format(format!(
                "header says {count} events, body holds {} bytes",
                body.len()
            )));
        }
        let timestamps_ps: Vec<u64> = body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let duration_s = duration_s
            .unwrap_or_else(|| timestamps_ps.last().map_or(0.0, |&t| t as f64 / PS_PER_S));
        let stream = Self {
            timestamps_ps,
            channel,
            duration_s,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# channel={} duration_s={}", self.channel, self.duration_s)?;
        writeln!(w, "timestamp_ps")?;
        for t in &self.timestamps_ps {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self, PhotonicsError> {
        let mut channel = None;
        let mut duration_s = None;
        let mut timestamps_ps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("channel", v)) => channel = Some(v.parse()?),
                        Some(("duration_s", v)) => {
                            duration_s = Some(v.parse().map_err(|_| {
                                PhotonicsError::Format(format!("bad duration {v:?}"))
                            })?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == "timestamp_ps" {
                continue;
            }
            timestamps_ps.push(line.parse().map_err(|_| {
                PhotonicsError::Format(format!("line {}: bad timestamp {line:?}", i + 1))
            })?);
        }
        let stream = Self {
            duration_s: duration_s
                .unwrap_or_else(|| timestamps_ps.last().map_or(0.0, |&t| t as f64 / PS_PER_S)),
            timestamps_ps,
            channel: channel.unwrap_or(DetectorChannel::Signal),
        };
        stream.validate()?;
        Ok(stream)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PhotonEventStream {
        PhotonEventStream {
            timestamps_ps: vec![0, 5, 1_000_000, u32::MAX as u64 + 7],
            channel: DetectorChannel::Idler,
            duration_s: 0.01,
        }
    }

    #[test]
    fn binary_roundtrip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 8 * s.len());
        assert_eq!(&buf[..4], b"QFSO");
        let back = PhotonEventStream::read_binary(&buf[..], Some(0.01)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_roundtrip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = PhotonEventStream::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_files() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        assert!(PhotonEventStream::read_binary(&buf[..buf.len() - 1], None).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(PhotonEventStream::read_binary(&bad[..], None).is_err());
        let unsorted = PhotonEventStream {
            timestamps_ps: vec![3, 3],
            ..sample()
        };
        assert!(unsorted.validate().is_err());
    }
}
