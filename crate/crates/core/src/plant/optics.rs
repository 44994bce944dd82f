//! Small-angle geometry of the link and single-mode-fiber coupling.
//!
//! Both actuators are mirrors, so a tilt θ deflects the beam by 2θ. The FSM
//! sits in the collimated space ahead of the receiver focus and moves the
//! focal-plane centroid by `2θ·f`; the reflector tilt swings the returning
//! beam across the receiver by `2θ·L`.

use serde::{Deserialize, Serialize};

use super::{FsmState, HexapodState, PlantError};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsGeometry {
    /// Effective receiver focal length, mm.
    pub receiver_focal_mm: f64,
    /// One-way distance to the reflector, m.
    pub path_to_reflector_m: f64,
    /// Static offset of the quantum-beam centroid relative to the tracking
    /// beam, μm.
    pub chromatic_offset_um: Vec2,
    /// Standard deviation of the slow wandering part of that offset, μm.
    pub chromatic_jitter_um: f64,
    /// Correlation bandwidth of the chromatic wander, Hz.
    pub chromatic_bandwidth_hz: f64,
}

impl Default for OpticsGeometry {
    fn default() -> Self {
        Self {
            receiver_focal_mm: 600.0,
            path_to_reflector_m: 125.0,
            chromatic_offset_um: Vec2::new(15.0, 0.0),
            chromatic_jitter_um: 3.0,
            chromatic_bandwidth_hz: 0.2,
        }
    }
}

impl OpticsGeometry {
    pub fn validate(&self) -> Result<(), PlantError> {
        let ok = self.receiver_focal_mm.is_finite()
            && self.receiver_focal_mm > 0.0
            && self.path_to_reflector_m.is_finite()
            && self.path_to_reflector_m > 0.0
            && self.chromatic_offset_um.is_finite()
            && self.chromatic_jitter_um.is_finite()
            && self.chromatic_jitter_um >= 0.0
            && self.chromatic_bandwidth_hz.is_finite()
            && self.chromatic_bandwidth_hz > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlantError::InvalidParameter(
                "focal length and path must be > 0; chromatic terms finite".into(),
            ))
        }
    }

    /// Focal-plane displacement per μrad of FSM tilt, μm/μrad.
    pub fn fsm_lever_um_per_urad(&self) -> f64 {
        2.0 * self.receiver_focal_mm * 1e-3
    }

    /// Receiver-plane displacement per μrad of reflector tilt, μm/μrad.
    pub fn hexapod_lever_um_per_urad(&self) -> f64 {
        2.0 * self.path_to_reflector_m
    }
}

/// Centroids of both beams at the receiver focal plane, μm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BeamCentroids {
    pub tracking: Vec2,
    pub quantum: Vec2,
}

/// Superposes disturbances and actuator deflections.
///
/// `chromatic_jitter` is the current value of the slow wandering part of the
/// chromatic offset; the static part comes from `geometry`.
pub fn beam_centroids(
    fsm: &FsmState,
    hexapod: &HexapodState,
    wander: Vec2,
    drift: Vec2,
    chromatic_jitter: Vec2,
    geometry: &OpticsGeometry,
) -> BeamCentroids {
    let tracking = wander
        + drift
        + hexapod.theta * geometry.hexapod_lever_um_per_urad()
        + fsm.theta * geometry.fsm_lever_um_per_urad();
    BeamCentroids {
        tracking,
        quantum: tracking + geometry.chromatic_offset_um + chromatic_jitter,
    }
}

/// Gaussian-overlap coupling into the single-mode fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingModel {
    /// Coupling at zero offset.
    pub eta0: f64,
    /// 1/e² overlap radius at the focal plane, μm.
    pub mode_radius_um: f64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self {
            // picked by harness::calibrate_eta0 on the default scenario
            // (grid step 0.01, target mean η = 0.19)
            eta0: 0.44,
            mode_radius_um: 30.0,
        }
    }
}

impl CouplingModel {
    pub fn validate(&self) -> Result<(), PlantError> {
        if (0.0..=1.0).contains(&self.eta0)
            && self.mode_radius_um.is_finite()
            && self.mode_radius_um > 0.0
        {
            Ok(())
        } else {
            Err(PlantError::InvalidParameter(
                "eta0 must be in [0,1] and mode radius > 0".into(),
            ))
        }
    }
}

/// `η = η0·exp(−2r²/w²)` for a centroid offset `r = |offset|`.
pub fn coupling_efficiency(offset: Vec2, model: &CouplingModel) -> f64 {
    let w2 = model.mode_radius_um * model.mode_radius_um;
    model.eta0 * (-2.0 * offset.norm_sqr() / w2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_inputs_give_zero_centroids() {
        let c = beam_centroids(
            &FsmState::default(),
            &HexapodState::default(),
            Vec2::ZERO,
            Vec2::ZERO,
            Vec2::ZERO,
            &OpticsGeometry {
                chromatic_offset_um: Vec2::ZERO,
                ..OpticsGeometry::default()
            },
        );
        assert_eq!(c.tracking, Vec2::ZERO);
        assert_eq!(c.quantum, Vec2::ZERO);
    }

    #[test]
    fn lever_arms() {
        let g = OpticsGeometry::default();
        let fsm = FsmState {
            theta: Vec2::new(1.0, 0.0),
            ..FsmState::default()
        };
        let c = beam_centroids(&fsm, &HexapodState::default(), Vec2::ZERO, Vec2::ZERO, Vec2::ZERO, &g);
        assert!((c.tracking.x - 1.2).abs() < 1e-12);
        assert_eq!(c.tracking.y, 0.0);

        let hex = HexapodState::at_rest(Vec2::new(1.0, 0.0));
        let c = beam_centroids(&FsmState::default(), &hex, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO, &g);
        assert!((c.tracking.x - 250.0).abs() < 1e-12);
        assert_eq!(c.quantum, c.tracking + g.chromatic_offset_um);
    }

    #[test]
    fn coupling_peak_and_decay() {
        let m = CouplingModel::default();
        assert_eq!(coupling_efficiency(Vec2::ZERO, &m), m.eta0);
        let at_w = coupling_efficiency(Vec2::new(m.mode_radius_um, 0.0), &m);
        assert!((at_w - m.eta0 * (-2.0f64).exp()).abs() < 1e-15);
    }
}
