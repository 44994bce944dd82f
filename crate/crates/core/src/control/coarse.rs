use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoarseConfig {
    /// Length of the trailing average, s.
    pub window_s: f64,
    /// Minimum spacing of evaluations, s.
    pub cadence_s: f64,
    /// Mean offsets at or below this radius are left alone, μm.
    pub deadband_um: f64,
    /// Beam displacement per μrad of reflector tilt, μm/μrad.
    pub hexapod_gain_um_per_urad: f64,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self {
            window_s: 10.0,
            cadence_s: 60.0,
            deadband_um: 25.0,
            hexapod_gain_um_per_urad: 250.0,
        }
    }
}

impl CoarseConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.window_s.is_finite()
            && self.window_s > 0.0
            && self.cadence_s.is_finite()
            && self.window_s <= self.cadence_s
            && self.deadband_um.is_finite()
            && self.deadband_um >= 0.0
            && self.hexapod_gain_um_per_urad.is_finite()
            && self.hexapod_gain_um_per_urad != 0.0;
        if ok {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig(
                "coarse: need 0 < window ≤ cadence, deadband ≥ 0, nonzero gain".into(),
            ))
        }
    }
}

/// Mean of the samples with `t` in `(now − window, now]`, or `None` when the
/// history does not reach back to `now − window`.
pub fn window_mean(history: &[(f64, Vec2)], now: f64, window_s: f64) -> Option<Vec2> {
    let start = now - window_s;
    let slack = 1e-9 * window_s.max(1.0);
    let oldest = history.first()?.0;
    if oldest > start + slack {
        return None;
    }
    let mut sum = Vec2::ZERO;
    let mut n = 0usize;
    for &(t, p) in history {
        if t > start + slack && t <= now + slack {
            sum += p;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Hexapod correction that would re-center `mean`, or `None` inside the
/// deadband.
pub fn correction_for(mean: Vec2, cfg: &CoarseConfig) -> Option<Vec2> {
    (mean.norm() > cfg.deadband_um).then(|| -mean / cfg.hexapod_gain_um_per_urad)
}

/// Result of one call to [`CoarseAligner::tick`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoarseDecision {
    /// Cadence has not elapsed since the previous evaluation.
    NotDue,
    /// Not enough history to average; counted as a warning.
    InsufficientHistory,
    /// Mean offset inside the deadband.
    WithinDeadband { mean: Vec2 },
    Move { mean: Vec2, delta: Vec2 },
}

impl CoarseDecision {
    pub fn delta(&self) -> Option<Vec2> {
        match *self {
            CoarseDecision::Move { delta, .. } => Some(delta),
            _ => None,
        }
    }
}

/// Slow re-centering of the beam by tilting the remote reflector.
///
/// Positions are recorded as they arrive; each evaluation averages the
/// trailing window and proposes at most one move. Evaluations are spaced by
/// at least `cadence_s`.
#[derive(Debug, Clone)]
pub struct CoarseAligner {
    cfg: CoarseConfig,
    history: VecDeque<(f64, Vec2)>,
    last_evaluation: Option<f64>,
    warnings: u64,
}

impl CoarseAligner {
    pub fn new(cfg: CoarseConfig) -> Result<Self, ControlError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            history: VecDeque::new(),
            last_evaluation: None,
            warnings: 0,
        })
    }

    pub fn config(&self) -> &CoarseConfig {
        &self.cfg
    }

    pub fn warnings(&self) -> u64 {
        self.warnings
    }

    /// Appends a position sample (μm). Samples must arrive in time order.
    pub fn record(&mut self, t: f64, position: Vec2) -> Result<(), ControlError> {
        if !(t.is_finite() && position.is_finite()) {
            return Err(ControlError::RejectedInput("non-finite position sample".into()));
        }
        if self.history.back().is_some_and(|&(last, _)| t < last) {
            return Err(ControlError::RejectedInput("position samples out of order".into()));
        }
        self.history.push_back((t, position));
        // keep one sample older than the window so coverage can be checked
        let horizon = t - self.cfg.window_s;
        while self.history.len() > 1 && self.history[1].0 <= horizon {
            self.history.pop_front();
        }
        Ok(())
    }

    pub fn tick(&mut self, now: f64) -> CoarseDecision {
        if let Some(last) = self.last_evaluation {
            if now - last < self.cfg.cadence_s - 1e-9 {
                return CoarseDecision::NotDue;
            }
        }
        self.last_evaluation = Some(now);
        let samples: Vec<(f64, Vec2)> = self.history.iter().copied().collect();
        let Some(mean) = window_mean(&samples, now, self.cfg.window_s) else {
            self.warnings += 1;
            return CoarseDecision::InsufficientHistory;
        };
        match correction_for(mean, &self.cfg) {
            Some(delta) => CoarseDecision::Move { mean, delta },
            None => CoarseDecision::WithinDeadband { mean },
        }
    }
}
