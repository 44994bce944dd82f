//! Remote reflector hexapod: slow first-order tilt stage.

use serde::{Deserialize, Serialize};

use super::PlantError;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HexapodParams {
    /// First-order settling time constant, s.
    pub settle_time_s: f64,
    /// Tilt resolution, μrad. Move requests are rounded to this step.
    pub min_step_urad: f64,
}

impl Default for HexapodParams {
    fn default() -> Self {
        Self {
            settle_time_s: 0.5,
            min_step_urad: 0.1,
        }
    }
}

impl HexapodParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if self.settle_time_s.is_finite()
            && self.settle_time_s > 0.0
            && self.min_step_urad.is_finite()
            && self.min_step_urad > 0.0
        {
            Ok(())
        } else {
            Err(PlantError::InvalidParameter(
                "hexapod settle time and step must be > 0".into(),
            ))
        }
    }

    fn quantize(&self, v: f64) -> f64 {
        (v / self.min_step_urad).round() * self.min_step_urad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HexapodState {
    /// Current reflector tilt, μrad.
    pub theta: Vec2,
    /// Tilt the stage is settling toward, μrad.
    pub target: Vec2,
}

impl HexapodState {
    /// A stage already at rest at `theta`.
    pub fn at_rest(theta: Vec2) -> Self {
        Self {
            theta,
            target: theta,
        }
    }

    /// Adds a relative move (rounded to the stage resolution) to the target.
    pub fn apply_move(&mut self, delta: Vec2, params: &HexapodParams) -> Result<(), PlantError> {
        if !delta.is_finite() {
            return Err(PlantError::RejectedInput("non-finite hexapod move".into()));
        }
        self.target += Vec2::new(params.quantize(delta.x), params.quantize(delta.y));
        Ok(())
    }
}

/// Advances the stage by `dt` seconds.
pub fn hexapod_step(state: &HexapodState, dt: f64, params: &HexapodParams) -> HexapodState {
    let k = 1.0 - (-dt / params.settle_time_s).exp();
    HexapodState {
        theta: state.theta + (state.target - state.theta) * k,
        target: state.target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settles_exponentially() {
        let p = HexapodParams::default();
        let mut s = HexapodState::default();
        s.apply_move(Vec2::new(2.0, -1.0), &p).unwrap();
        for _ in 0..500 {
            s = hexapod_step(&s, 1e-3, &p);
        }
        // one time constant
        let expected = 2.0 * (1.0 - (-1.0f64).exp());
        assert!((s.theta.x - expected).abs() < 1e-9);
    }

    #[test]
    fn moves_are_quantized() {
        let p = HexapodParams::default();
        let mut s = HexapodState::default();
        s.apply_move(Vec2::new(0.14, -0.26), &p).unwrap();
        assert!((s.target.x - 0.1).abs() < 1e-12);
        assert!((s.target.y + 0.3).abs() < 1e-12);
        assert!(s.apply_move(Vec2::new(f64::NAN, 0.0), &p).is_err());
    }
}
