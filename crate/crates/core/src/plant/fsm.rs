//! Fast steering mirror: a linear second-order actuator per axis.
//!
//! Commands are clamped to the mechanical range and rounded to the nearest
//! multiple of the angular resolution (ties away from zero) before they reach
//! the mirror. The mirror then follows `θ'' + 2ζω θ' + ω²θ = ω²·target`,
//! integrated exactly over each step, so the 1 kHz simulation step is stable
//! even though it is coarser than the 1.6 kHz resonance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::PlantError;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsmParams {
    /// Angular quantization step, μrad.
    pub resolution_urad: f64,
    /// Symmetric mechanical limit, μrad.
    pub range_urad: f64,
    /// Undamped natural frequency, Hz.
    pub resonance_hz: f64,
    pub damping_ratio: f64,
}

impl Default for FsmParams {
    fn default() -> Self {
        Self {
            resolution_urad: 0.25,
            range_urad: 2000.0,
            resonance_hz: 1600.0,
            damping_ratio: 0.7,
        }
    }
}

impl FsmParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let ok = self.resolution_urad.is_finite()
            && self.resolution_urad > 0.0
            && self.range_urad.is_finite()
            && self.range_urad > 0.0
            && self.resonance_hz.is_finite()
            && self.resonance_hz > 0.0
            && self.damping_ratio.is_finite()
            && self.damping_ratio > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlantError::InvalidParameter(
                "FSM resolution, range, resonance and damping must be > 0".into(),
            ))
        }
    }

    /// Quantized, range-limited angle for one axis.
    pub fn quantize(&self, commanded: f64) -> f64 {
        let res = self.resolution_urad;
        let clamped = commanded.clamp(-self.range_urad, self.range_urad);
        let mut steps = (clamped / res).round();
        if (steps * res).abs() > self.range_urad {
            // range not a multiple of the resolution: step back inside
            steps -= steps.signum();
        }
        steps * res
    }

    /// The angle pair the mirror is actually driven toward.
    pub fn actuated_target(&self, commanded: Vec2) -> Vec2 {
        Vec2::new(self.quantize(commanded.x), self.quantize(commanded.y))
    }

    /// 2 % settling time of the step response, `4/(ζω)`.
    pub fn settling_time_s(&self) -> f64 {
        4.0 / (self.damping_ratio * 2.0 * PI * self.resonance_hz)
    }
}

/// Mirror state: mechanical tilt, tilt rate, and last command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FsmState {
    /// Mechanical tilt, μrad.
    pub theta: Vec2,
    /// Tilt rate, μrad/s.
    pub rate: Vec2,
    /// Raw commanded tilt, μrad (before clamping and quantization).
    pub commanded: Vec2,
}

impl FsmState {
    /// Sets a new command. Non-finite commands are rejected and leave the
    /// previous command in place.
    pub fn command(&mut self, commanded: Vec2) -> Result<(), PlantError> {
        if !commanded.is_finite() {
            return Err(PlantError::RejectedInput("non-finite FSM command".into()));
        }
        self.commanded = commanded;
        Ok(())
    }
}

/// Exact response of one second-order axis after `dt`, given error
/// `e0 = θ − target` and rate `v0`. Returns `(e, v)`.
fn second_order(e0: f64, v0: f64, dt: f64, omega: f64, zeta: f64) -> (f64, f64) {
    if zeta < 1.0 {
        let sigma = zeta * omega;
        let wd = omega * (1.0 - zeta * zeta).sqrt();
        let decay = (-sigma * dt).exp();
        let (s, c) = (wd * dt).sin_cos();
        let e = decay * (e0 * c + (v0 + sigma * e0) / wd * s);
        let v = decay * (v0 * c - (omega * omega * e0 + sigma * v0) / wd * s);
        (e, v)
    } else if zeta == 1.0 {
        let decay = (-omega * dt).exp();
        let b = v0 + omega * e0;
        ((e0 + b * dt) * decay, (v0 - omega * b * dt) * decay)
    } else {
        let root = (zeta * zeta - 1.0).sqrt();
        let r1 = -omega * (zeta - root);
        let r2 = -omega * (zeta + root);
        let a = (v0 - r2 * e0) / (r1 - r2);
        let b = e0 - a;
        let (x1, x2) = ((r1 * dt).exp(), (r2 * dt).exp());
        (a * x1 + b * x2, a * r1 * x1 + b * r2 * x2)
    }
}

/// Advances the mirror by `dt` seconds toward its quantized command.
pub fn fsm_step(state: &FsmState, dt: f64, params: &FsmParams) -> Result<FsmState, PlantError> {
    if !state.commanded.is_finite() {
        return Err(PlantError::RejectedInput("non-finite FSM command".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PlantError::RejectedInput(format!("dt must be > 0, got {dt}")));
    }
    let target = params.actuated_target(state.commanded);
    let omega = 2.0 * PI * params.resonance_hz;
    let axis = |theta: f64, rate: f64, target: f64| {
        let (e, v) = second_order(theta - target, rate, dt, omega, params.damping_ratio);
        let theta = target + e;
        if theta.abs() > params.range_urad {
            // hard stop
            (theta.clamp(-params.range_urad, params.range_urad), 0.0)
        } else {
            (theta, v)
        }
    };
    let (tx, vx) = axis(state.theta.x, state.rate.x, target.x);
    let (ty, vy) = axis(state.theta.y, state.rate.y, target.y);
    Ok(FsmState {
        theta: Vec2::new(tx, ty),
        rate: Vec2::new(vx, vy),
        commanded: state.commanded,
    })
}
