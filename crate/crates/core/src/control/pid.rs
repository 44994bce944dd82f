use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::vec2::Vec2;

/// Fine-loop gains and limits. Errors are in mm at the sensor, commands in
/// μrad of FSM tilt; the same gains apply to both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidConfig {
    /// μrad per mm.
    pub kp: f64,
    /// μrad per (mm·s).
    pub ki: f64,
    /// μrad·s per mm.
    pub kd: f64,
    pub rate_hz: f64,
    pub output_limit_urad: f64,
    /// Bound on the integral term, μrad.
    pub integrator_limit_urad: f64,
    /// Corner of the low-pass applied to the error before differencing, Hz.
    pub derivative_filter_hz: f64,
    /// Rate of the supervisory trace channel, Hz.
    pub monitor_rate_hz: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            kp: 40.0,
            ki: 1.4e5,
            kd: 0.0,
            rate_hz: 200.0,
            output_limit_urad: 2000.0,
            integrator_limit_urad: 2000.0,
            derivative_filter_hz: 50.0,
            monitor_rate_hz: 20.0,
        }
    }
}

impl PidConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let finite = [self.kp, self.ki, self.kd].iter().all(|g| g.is_finite());
        let positive = [
            self.rate_hz,
            self.output_limit_urad,
            self.integrator_limit_urad,
            self.derivative_filter_hz,
            self.monitor_rate_hz,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if finite && positive {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig(
                "pid: gains must be finite; rates and limits must be > 0".into(),
            ))
        }
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Integral term, μrad.
    pub integrator: Vec2,
    /// Low-passed error from the previous update, mm.
    pub previous_error: Vec2,
    /// Last command issued, μrad.
    pub output: Vec2,
    /// Set once any update has run.
    pub primed: bool,
    /// Raised when an update was skipped because the error was not finite.
    pub fault: bool,
}

/// One controller update.
///
/// `u = kp·e + I + kd·ė_f`, with `I += ki·e·dt` clamped to the integrator
/// limit and `ė_f` the backward difference of the low-passed error. The first
/// update has no derivative kick. A non-finite error holds the previous
/// command and raises `fault`.
pub fn pid_update(
    state: &PidState,
    error: Vec2,
    dt: f64,
    cfg: &PidConfig,
) -> Result<(Vec2, PidState), ControlError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ControlError::RejectedInput(format!("dt must be > 0, got {dt}")));
    }
    if !error.is_finite() {
        let held = PidState {
            fault: true,
            ..*state
        };
        return Ok((state.output, held));
    }
    let ilim = cfg.integrator_limit_urad;
    let integrator = (state.integrator + error * (cfg.ki * dt)).clamp_abs(ilim);
    let (filtered, derivative) = if state.primed {
        let alpha = 1.0 - (-2.0 * PI * cfg.derivative_filter_hz * dt).exp();
        let f = state.previous_error + (error - state.previous_error) * alpha;
        (f, (f - state.previous_error) / dt)
    } else {
        (error, Vec2::ZERO)
    };
    let output =
        (error * cfg.kp + integrator + derivative * cfg.kd).clamp_abs(cfg.output_limit_urad);
    let next = PidState {
        integrator,
        previous_error: filtered,
        output,
        primed: true,
        fault: state.fault,
    };
    Ok((output, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_only(kp: f64) -> PidConfig {
        PidConfig {
            kp,
            ki: 0.0,
            kd: 0.0,
            ..PidConfig::default()
        }
    }

    #[test]
    fn zero_error_zero_command() {
        let (u, _) = pid_update(&PidState::default(), Vec2::ZERO, 0.005, &PidConfig::default()).unwrap();
        assert_eq!(u, Vec2::ZERO);
    }

    #[test]
    fn unit_proportional() {
        let (u, _) = pid_update(&PidState::default(), Vec2::new(2.0, -1.0), 0.005, &p_only(1.0)).unwrap();
        assert_eq!(u, Vec2::new(2.0, -1.0));
    }

    #[test]
    fn integrator_pins_at_limit() {
        let cfg = PidConfig {
            kp: 0.0,
            ki: 10.0,
            integrator_limit_urad: 5.0,
            ..PidConfig::default()
        };
        let mut s = PidState::default();
        for _ in 0..200 {
            s = pid_update(&s, Vec2::new(1.0, 1.0), 0.01, &cfg).unwrap().1;
            assert!(s.integrator.x <= 5.0);
        }
        assert_eq!(s.integrator, Vec2::new(5.0, 5.0));
    }

    #[test]
    fn output_clamped() {
        let cfg = PidConfig {
            output_limit_urad: 3.0,
            ..p_only(100.0)
        };
        let (u, _) = pid_update(&PidState::default(), Vec2::new(1.0, -1.0), 0.005, &cfg).unwrap();
        assert_eq!(u, Vec2::new(3.0, -3.0));
    }

    #[test]
    fn non_finite_error_holds_and_faults() {
        let cfg = PidConfig::default();
        let (u1, s1) = pid_update(&PidState::default(), Vec2::new(0.01, 0.0), 0.005, &cfg).unwrap();
        let (u2, s2) = pid_update(&s1, Vec2::new(f64::NAN, 0.0), 0.005, &cfg).unwrap();
        assert_eq!(u1, u2);
        assert!(s2.fault);
        assert_eq!(s2.integrator, s1.integrator);
    }

    #[test]
    fn no_derivative_kick_on_first_update() {
        let cfg = PidConfig {
            kd: 1.0,
            ..p_only(0.0)
        };
        let (u, s) = pid_update(&PidState::default(), Vec2::new(1.0, 0.0), 0.005, &cfg).unwrap();
        assert_eq!(u, Vec2::ZERO);
        let (u, _) = pid_update(&s, Vec2::new(2.0, 0.0), 0.005, &cfg).unwrap();
        assert!(u.x > 0.0);
    }
}
