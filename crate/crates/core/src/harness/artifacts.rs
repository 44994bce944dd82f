use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, ScenarioConfig};
use crate::control::{CoarseEvent, CoarseStatus, TraceLog};
use crate::netlink::BridgeStats;
use crate::photonics::{ChannelTally, ExtraLossFit, PhotonEventStream};
use crate::vec2::Vec2;

/// Written into the run directory when a run fails part way.
pub const FAILED_MARKER: &str = "FAILED";

/// File names inside a run directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const TRACE_CORRECTED: &str = "trace_corrected.csv";
    pub const TRACE_UNCORRECTED: &str = "trace_uncorrected.csv";
    pub const COARSE_EVENTS: &str = "coarse_events.csv";
    pub const SIGNAL: &str = "signal.bin";
    pub const IDLER: &str = "idler.bin";
    pub const RUN_STATS: &str = "run_stats.json";
    pub const HISTOGRAM: &str = "g2_histogram.csv";
    pub const REPORT: &str = "report.json";
}

/// Counters produced during the run that cannot be recovered from the traces
/// or timestamp files alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunStats {
    pub config_hash: String,
    pub signal_tally: ChannelTally,
    pub idler_tally: ChannelTally,
    /// Present when `extra_loss` was calibrated for this run.
    pub extra_loss_fit: Option<ExtraLossFit>,
    /// Value used by the signal channel.
    pub extra_loss: f64,
    pub bridge: Option<BridgeStats>,
    pub coarse_warnings: u64,
    pub pid_faults: u64,
    pub beam_lost_steps: u64,
}

/// Everything [`analyze`](super::analyze) needs, as persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet {
    pub config: ScenarioConfig,
    pub corrected: TraceLog,
    pub uncorrected: TraceLog,
    pub coarse_events: Vec<CoarseEvent>,
    pub signal: PhotonEventStream,
    pub idler: PhotonEventStream,
    pub stats: RunStats,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), HarnessError> {
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_trace(path: &Path, trace: &TraceLog) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    trace.write_csv(&mut w).map_err(|e| HarnessError::io(path, e))?;
    finish(w, path)
}

pub(crate) fn write_stream(path: &Path, stream: &PhotonEventStream) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    stream.write_binary(&mut w).map_err(|e| HarnessError::io(path, e))?;
    finish(w, path)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::artifact(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_coarse(path: &Path, events: &[CoarseEvent], hash: &str) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    write_coarse_events(&mut w, events, Some(hash)).map_err(|e| HarnessError::io(path, e))?;
    finish(w, path)
}

const COARSE_HEADER: &str = "time_s,mean_x_um,mean_y_um,delta_x_urad,delta_y_urad,status,attempts,applied_at_s";

pub fn write_coarse_events<W: Write>(
    mut w: W,
    events: &[CoarseEvent],
    config_hash: Option<&str>,
) -> std::io::Result<()> {
    if let Some(h) = config_hash {
        writeln!(w, "# config_hash={h}")?;
    }
    writeln!(w, "{COARSE_HEADER}")?;
    for e in events {
        let applied = e.applied_at_s.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            e.time_s,
            e.mean.x,
            e.mean.y,
            e.delta.x,
            e.delta.y,
            e.status.as_str(),
            e.attempts,
            applied
        )?;
    }
    Ok(())
}

/// Parses the output of [`write_coarse_events`]; returns the events and the
/// recorded config hash.
pub fn read_coarse_events(text: &str) -> Result<(Vec<CoarseEvent>, Option<String>), String> {
    let mut hash = None;
    let mut events = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some(h) = meta.trim().strip_prefix("config_hash=") {
                hash = Some(h.to_string());
            }
            continue;
        }
        if !header_seen {
            if line != COARSE_HEADER {
                return Err(format!("line {}: unexpected header {line:?}", n + 1));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(format!("line {}: expected 8 fields, got {}", n + 1, f.len()));
        }
        let num = |s: &str| -> Result<f64, String> {
            s.parse().map_err(|_| format!("line {}: bad number {s:?}", n + 1))
        };
        events.push(CoarseEvent {
            time_s: num(f[0])?,
            mean: Vec2::new(num(f[1])?, num(f[2])?),
            delta: Vec2::new(num(f[3])?, num(f[4])?),
            status: CoarseStatus::parse(f[5]).ok_or(format!("line {}: bad status {:?}", n + 1, f[5]))?,
            attempts: f[6].parse().map_err(|_| format!("line {}: bad attempts", n + 1))?,
            applied_at_s: if f[7].is_empty() { None } else { Some(num(f[7])?) },
        });
    }
    if !header_seen {
        return Err("missing header".into());
    }
    Ok((events, hash))
}

impl ArtifactSet {
    /// Writes every input of the analysis into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let hash = self.stats.config_hash.as_str();
        write_text(&dir.join(files::CONFIG), &self.config.to_toml_string())?;
        write_trace(&dir.join(files::TRACE_CORRECTED), &self.corrected)?;
        write_trace(&dir.join(files::TRACE_UNCORRECTED), &self.uncorrected)?;
        write_coarse(&dir.join(files::COARSE_EVENTS), &self.coarse_events, hash)?;
        write_stream(&dir.join(files::SIGNAL), &self.signal)?;
        write_stream(&dir.join(files::IDLER), &self.idler)?;
        write_json(&dir.join(files::RUN_STATS), &self.stats)
    }

    /// Loads a run directory and checks that every artifact carries the same
    /// config hash.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(files::CONFIG);
        let config = ScenarioConfig::from_toml_str(&read_text(&path)?)
            .map_err(|e| HarnessError::artifact(&path, e))?;
        let hash = config.hash();

        let path = dir.join(files::RUN_STATS);
        let stats: RunStats =
            serde_json::from_str(&read_text(&path)?).map_err(|e| HarnessError::artifact(&path, e))?;
        check_hash(&path, Some(&stats.config_hash), &hash)?;

        let trace = |name: &str| -> Result<TraceLog, HarnessError> {
            let path = dir.join(name);
            let t = TraceLog::from_csv(&read_text(&path)?).map_err(|e| HarnessError::artifact(&path, e))?;
            check_hash(&path, t.config_hash.as_deref(), &hash)?;
            Ok(t)
        };
        let corrected = trace(files::TRACE_CORRECTED)?;
        let uncorrected = trace(files::TRACE_UNCORRECTED)?;

        let path = dir.join(files::COARSE_EVENTS);
        let (coarse_events, h) = read_coarse_events(&read_text(&path)?).map_err(|e| HarnessError::artifact(&path, e))?;
        check_hash(&path, h.as_deref(), &hash)?;

        let duration = config.photonics.duration_s;
        let stream = |name: &str| -> Result<PhotonEventStream, HarnessError> {
            let path = dir.join(name);
            let f = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
            PhotonEventStream::read_binary(BufReader::new(f), Some(duration))
                .map_err(|e| HarnessError::artifact(&path, e))
        };
        Ok(Self {
            signal: stream(files::SIGNAL)?,
            idler: stream(files::IDLER)?,
            config,
            corrected,
            uncorrected,
            coarse_events,
            stats,
        })
    }
}

fn check_hash(path: &Path, found: Option<&str>, expected: &str) -> Result<(), HarnessError> {
    match found {
        Some(h) if h == expected => Ok(()),
        Some(h) => Err(HarnessError::artifact(
            path,
            format!("config hash {h} does not match config.toml ({expected})"),
        )),
        None => Err(HarnessError::artifact(path, "no config hash recorded")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_events_roundtrip() {
        let events = vec![
            CoarseEvent {
                time_s: 60.0,
                mean: Vec2::new(31.25, -0.1),
                delta: Vec2::new(-0.125, 0.0004),
                status: CoarseStatus::Applied,
                attempts: 2,
                applied_at_s: Some(60.0371),
            },
            CoarseEvent {
                time_s: 120.0,
                mean: Vec2::new(-40.0, 0.0),
                delta: Vec2::new(0.16, 0.0),
                status: CoarseStatus::Pending,
                attempts: 0,
                applied_at_s: None,
            },
        ];
        let mut buf = Vec::new();
        write_coarse_events(&mut buf, &events, Some("abc")).unwrap();
        let (back, hash) = read_coarse_events(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, events);
        assert_eq!(hash.as_deref(), Some("abc"));
    }

    #[test]
    fn coarse_events_reject_bad_rows() {
        assert!(read_coarse_events("").is_err());
        let text = format!("{COARSE_HEADER}\n1,2,3,4,5,maybe,1,\n");
        assert!(read_coarse_events(&text).is_err());
    }
}
