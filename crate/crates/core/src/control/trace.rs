use std::io::{self, Write};

use super::ControlError;
use crate::vec2::Vec2;

/// Column names of the persisted trace, in order.
pub const TRACE_COLUMNS: [&str; 14] = [
    "time_s",
    "track_x_um",
    "track_y_um",
    "quant_x_um",
    "quant_y_um",
    "fsm_cmd_x_urad",
    "fsm_cmd_y_urad",
    "hex_x_urad",
    "hex_y_urad",
    "eta",
    "psd_x_mm",
    "psd_y_mm",
    "scint",
    "beam_lost",
];

/// One simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    /// Tracking-beam centroid, μm.
    pub tracking: Vec2,
    /// Quantum-beam centroid, μm.
    pub quantum: Vec2,
    /// Last FSM command, μrad.
    pub fsm_cmd: Vec2,
    /// Reflector tilt, μrad.
    pub hexapod: Vec2,
    /// Fiber coupling efficiency.
    pub eta: f64,
    /// Sensor reading, mm; NaN while the beam is lost.
    pub psd: Vec2,
    /// Scintillation transmittance factor.
    pub scint: f64,
    pub beam_lost: bool,
}

impl TraceRow {
    fn values(&self) -> [f64; 13] {
        [
            self.time_s,
            self.tracking.x,
            self.tracking.y,
            self.quantum.x,
            self.quantum.y,
            self.fsm_cmd.x,
            self.fsm_cmd.y,
            self.hexapod.x,
            self.hexapod.y,
            self.eta,
            self.psd.x,
            self.psd.y,
            self.scint,
        ]
    }
}

/// Per-step record of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceLog {
    pub config_hash: Option<String>,
    pub rows: Vec<TraceRow>,
}

impl TraceLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows with `time_s ≥ t0`.
    pub fn since(&self, t0: f64) -> &[TraceRow] {
        let start = self.rows.partition_point(|r| r.time_s < t0);
        &self.rows[start..]
    }

    /// Every `every`-th row, starting with the first. This is the low-rate
    /// supervisory view of the run.
    pub fn downsample(&self, every: usize) -> Vec<TraceRow> {
        self.rows.iter().step_by(every.max(1)).copied().collect()
    }

    /// The trace as the supervisory monitor sees it: one row per
    /// `1/monitor_rate_hz`, for a trace recorded at `sim_rate_hz`.
    pub fn monitor(&self, sim_rate_hz: f64, monitor_rate_hz: f64) -> Vec<TraceRow> {
        let every = (sim_rate_hz / monitor_rate_hz).round();
        self.downsample(if every.is_finite() && every >= 1.0 { every as usize } else { 1 })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if let Some(hash) = &self.config_hash {
            writeln!(w, "# config_hash={hash}")?;
        }
        writeln!(w, "{}", TRACE_COLUMNS.join(","))?;
        for row in &self.rows {
            for v in row.values() {
                write!(w, "{v},")?;
            }
            writeln!(w, "{}", u8::from(row.beam_lost))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }

    pub fn from_csv(text: &str) -> Result<Self, ControlError> {
        let mut log = TraceLog::default();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(hash) = comment.trim().strip_prefix("config_hash=") {
                    log.config_hash = Some(hash.to_string());
                }
                continue;
            }
            if !header_seen {
                if line != TRACE_COLUMNS.join(",") {
                    return Err(ControlError::Trace {
                        line: i + 1,
                        message: "unexpected header".into(),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != TRACE_COLUMNS.len() {
                return Err(ControlError::Trace {
                    line: i + 1,
                    message: format!("expected {} fields, got {}", TRACE_COLUMNS.len(), fields.len()),
                });
            }
            let mut v = [0.0f64; 13];
            for (slot, field) in v.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| ControlError::Trace {
                    line: i + 1,
                    message: format!("bad number {field:?}"),
                })?;
            }
            let beam_lost = match fields[13] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(ControlError::Trace {
                        line: i + 1,
                        message: format!("bad beam_lost flag {other:?}"),
                    })
                }
            };
            log.rows.push(TraceRow {
                time_s: v[0],
                tracking: Vec2::new(v[1], v[2]),
                quantum: Vec2::new(v[3], v[4]),
                fsm_cmd: Vec2::new(v[5], v[6]),
                hexapod: Vec2::new(v[7], v[8]),
                eta: v[9],
                psd: Vec2::new(v[10], v[11]),
                scint: v[12],
                beam_lost,
            });
        }
        if !header_seen {
            return Err(ControlError::Trace {
                line: 0,
                message: "missing header".into(),
            });
        }
        Ok(log)
    }
}
