//! Extraordinary index of KTP and its temperature dependence.

use serde::{Deserialize, Serialize};

/// Room-temperature Sellmeier fit for `n_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionModel {
    /// Fradkin et al. (1999), fitted over 0.4 to 4 μm.
    #[default]
    Fradkin,
    /// Kato and Takaoka (2002).
    Kato,
}

// Emanueli and Arie (2003): dn = n1·ΔT + n2·ΔT², n_k = Σ c_m / λ^m.
const THERMAL_N1: [f64; 4] = [9.9587e-6, 9.9228e-6, -8.9603e-6, 4.1010e-6];
const THERMAL_N2: [f64; 4] = [-1.1882e-8, 10.459e-8, -9.8136e-8, 3.1481e-8];

/// Reference temperature of the Sellmeier fits and of the poling period, °C.
pub const REFERENCE_TEMP_C: f64 = 25.0;

/// Linear and quadratic thermal expansion of KTP along x.
const EXPANSION_ALPHA: f64 = 6.7e-6;
const EXPANSION_BETA: f64 = 11e-9;

impl DispersionModel {
    /// Index at `lambda_um` and 25 °C.
    pub fn n_room(self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        let n2 = match self {
            DispersionModel::Fradkin => {
                2.12725 + 1.18431 / (1.0 - 0.0514852 / l2) + 0.6603 / (1.0 - 100.00507 / l2)
                    - 9.68956e-3 * l2
            }
            DispersionModel::Kato => {
                4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171)
            }
        };
        n2.sqrt()
    }

    /// Index at `lambda_um` and `temp_c`.
    pub fn n_z(self, lambda_um: f64, temp_c: f64) -> f64 {
        self.n_room(lambda_um) + thermal_shift(lambda_um, temp_c)
    }
}

fn poly_inv(c: &[f64; 4], lambda_um: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc / lambda_um + ck)
}

/// Temperature-induced index change relative to 25 °C.
pub fn thermal_shift(lambda_um: f64, temp_c: f64) -> f64 {
    let dt = temp_c - REFERENCE_TEMP_C;
    poly_inv(&THERMAL_N1, lambda_um) * dt + poly_inv(&THERMAL_N2, lambda_um) * dt * dt
}

/// Poling period after thermal expansion of a grating that measures
/// `period_um` at 25 °C.
pub fn poling_period_at(period_um: f64, temp_c: f64) -> f64 {
    let dt = temp_c - REFERENCE_TEMP_C;
    period_um * (1.0 + EXPANSION_ALPHA * dt + EXPANSION_BETA * dt * dt)
}
