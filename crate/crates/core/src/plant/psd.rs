//! Four-anode (pin-cushion) position-sensitive detector.
//!
//! The spot position is recovered from the anode voltages as
//!
//! ```text
//! x = ((V2 + V3) − (V1 + V4)) / ΣV · Lx/2
//! y = ((V2 + V4) − (V1 + V3)) / ΣV · Ly/2
//! ```
//!
//! so anode 2 sits at (+x, +y), 3 at (+x, −y), 4 at (−x, +y) and 1 at
//! (−x, −y). The forward model splits the photocurrent bilinearly between the
//! anodes, which is the simplest split whose inverse is exactly the formula
//! above.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PlantError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdModel {
    /// Active-area width, mm.
    pub size_x_mm: f64,
    /// Active-area height, mm.
    pub size_y_mm: f64,
    /// Additive Gaussian noise per anode, V.
    pub noise_sigma_v: f64,
    /// Total anode voltage per unit optical power, V/mW.
    pub responsivity_v_per_mw: f64,
}

impl Default for PsdModel {
    fn default() -> Self {
        Self {
            size_x_mm: 14.0,
            size_y_mm: 14.0,
            noise_sigma_v: 0.5e-3,
            responsivity_v_per_mw: 4.0,
        }
    }
}

impl PsdModel {
    pub fn validate(&self) -> Result<(), PlantError> {
        let ok = self.size_x_mm.is_finite()
            && self.size_x_mm > 0.0
            && self.size_y_mm.is_finite()
            && self.size_y_mm > 0.0
            && self.noise_sigma_v.is_finite()
            && self.noise_sigma_v >= 0.0
            && self.responsivity_v_per_mw.is_finite()
            && self.responsivity_v_per_mw > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlantError::InvalidParameter(
                "PSD dimensions and responsivity must be > 0, noise ≥ 0".into(),
            ))
        }
    }

    pub fn half_x(&self) -> f64 {
        self.size_x_mm / 2.0
    }

    pub fn half_y(&self) -> f64 {
        self.size_y_mm / 2.0
    }

    pub fn contains(&self, spot: SpotPosition) -> bool {
        spot.x.abs() <= self.half_x() && spot.y.abs() <= self.half_y()
    }
}

/// Spot coordinates on the sensor, mm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpotPosition {
    pub x: f64,
    pub y: f64,
}

/// Anode voltages V1..V4, V.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnodeVoltages {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
}

impl AnodeVoltages {
    pub fn sum(&self) -> f64 {
        self.v1 + self.v2 + self.v3 + self.v4
    }
}

/// Spot position from anode voltages.
pub fn psd_position(v: &AnodeVoltages, model: &PsdModel) -> Result<SpotPosition, PlantError> {
    let sum = v.sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(PlantError::DegenerateReading { sum });
    }
    let x = ((v.v2 + v.v3) - (v.v1 + v.v4)) / sum * model.half_x();
    let y = ((v.v2 + v.v4) - (v.v1 + v.v3)) / sum * model.half_y();
    Ok(SpotPosition { x, y })
}

/// Anode voltages for a spot of `power_mw` at `spot`, plus per-anode noise.
///
/// A spot outside the active area produces noise only. Four normal draws are
/// consumed per call whatever the noise level.
pub fn psd_voltages<R: Rng + ?Sized>(
    spot: SpotPosition,
    power_mw: f64,
    model: &PsdModel,
    rng: &mut R,
) -> AnodeVoltages {
    let mut noise = [0.0f64; 4];
    for n in &mut noise {
        let z: f64 = rng.sample(StandardNormal);
        *n = model.noise_sigma_v * z;
    }
    let total = model.responsivity_v_per_mw * power_mw.max(0.0);
    let clean = if model.contains(spot) && spot.x.is_finite() && spot.y.is_finite() {
        let u = spot.x / model.half_x();
        let w = spot.y / model.half_y();
        AnodeVoltages {
            v1: total * (1.0 - u) * (1.0 - w) / 4.0,
            v2: total * (1.0 + u) * (1.0 + w) / 4.0,
            v3: total * (1.0 + u) * (1.0 - w) / 4.0,
            v4: total * (1.0 - u) * (1.0 + w) / 4.0,
        }
    } else {
        AnodeVoltages::default()
    };
    AnodeVoltages {
        v1: clean.v1 + noise[0],
        v2: clean.v2 + noise[1],
        v3: clean.v3 + noise[2],
        v4: clean.v4 + noise[3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn quiet() -> PsdModel {
        PsdModel {
            noise_sigma_v: 0.0,
            ..PsdModel::default()
        }
    }

    #[test]
    fn symmetric_illumination_is_centered() {
        let v = AnodeVoltages {
            v1: 1.0,
            v2: 1.0,
            v3: 1.0,
            v4: 1.0,
        };
        assert_eq!(psd_position(&v, &quiet()).unwrap(), SpotPosition { x: 0.0, y: 0.0 });
    }

    #[test]
    fn edge_illumination_hits_boundary() {
        let v = AnodeVoltages {
            v1: 0.0,
            v2: 1.0,
            v3: 1.0,
            v4: 0.0,
        };
        let p = psd_position(&v, &quiet()).unwrap();
        assert_eq!(p.x, 7.0);
        assert_eq!(p.y, 0.0);
    }

    #[test]
    fn degenerate_sums_rejected() {
        let zero = AnodeVoltages::default();
        assert!(matches!(
            psd_position(&zero, &quiet()),
            Err(PlantError::DegenerateReading { .. })
        ));
        let negative = AnodeVoltages {
            v1: -1.0,
            v2: 0.1,
            v3: 0.1,
            v4: 0.1,
        };
        assert!(psd_position(&negative, &quiet()).is_err());
    }

    #[test]
    fn centered_spot_splits_evenly() {
        let mut rng = stream_rng(0, Stream::PsdNoise);
        let v = psd_voltages(SpotPosition { x: 0.0, y: 0.0 }, 1.0, &quiet(), &mut rng);
        for a in [v.v1, v.v2, v.v3, v.v4] {
            assert_eq!(a, 1.0);
        }
    }

    #[test]
    fn corner_of_inversion() {
        let mut rng = stream_rng(0, Stream::PsdNoise);
        let v = psd_voltages(SpotPosition { x: 7.0, y: 0.0 }, 1.0, &quiet(), &mut rng);
        assert_eq!(v.v1, 0.0);
        assert_eq!(v.v4, 0.0);
        assert_eq!(v.v2, v.sum() / 2.0);
        assert_eq!(v.v3, v.sum() / 2.0);
    }

    #[test]
    fn off_sensor_spot_is_noise_floor() {
        let mut rng = stream_rng(0, Stream::PsdNoise);
        let model = PsdModel::default();
        let v = psd_voltages(SpotPosition { x: 9.0, y: 0.0 }, 1.0, &model, &mut rng);
        for a in [v.v1, v.v2, v.v3, v.v4] {
            assert!(a.abs() < 10.0 * model.noise_sigma_v);
        }
    }
}
