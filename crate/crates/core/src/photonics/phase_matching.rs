use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dispersion::{poling_period_at, DispersionModel};
use super::PhotonicsError;

/// Model temperature minus set temperature that puts degeneracy at
/// [`DEGENERACY_SET_TEMP_C`] for the default crystal and the Fradkin index.
/// Reproduced by [`calibrate_temp_offset`].
pub const DEFAULT_TEMP_OFFSET_C: f64 = 10.680_718_609_590_95;

/// Set temperature at which the source runs degenerate at 810 nm, °C.
pub const DEGENERACY_SET_TEMP_C: f64 = 25.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMatchParams {
    pub pump_nm: f64,
    /// Grating period at 25 °C, μm.
    pub poling_period_um: f64,
    pub crystal_length_mm: f64,
    /// Crystal set temperature, °C.
    pub temp_c: f64,
    pub dispersion: DispersionModel,
    /// Added to the set temperature before evaluating the index model, °C.
    pub temp_offset_c: f64,
}

impl Default for PhaseMatchParams {
    fn default() -> Self {
        Self {
            pump_nm: 405.0,
            poling_period_um: 3.425,
            crystal_length_mm: 30.0,
            temp_c: DEGENERACY_SET_TEMP_C,
            dispersion: DispersionModel::Fradkin,
            temp_offset_c: DEFAULT_TEMP_OFFSET_C,
        }
    }
}

impl PhaseMatchParams {
    pub fn validate(&self) -> Result<(), PhotonicsError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if pos(self.pump_nm)
            && pos(self.poling_period_um)
            && pos(self.crystal_length_mm)
            && self.temp_c.is_finite()
            && self.temp_offset_c.is_finite()
        {
            Ok(())
        } else {
            Err(PhotonicsError::InvalidParameter(
                "phase matching: lengths must be > 0 and temperatures finite".into(),
            ))
        }
    }

    pub fn degenerate_nm(&self) -> f64 {
        2.0 * self.pump_nm
    }
}

/// Idler wavelength fixed by energy conservation, nm.
pub fn idler_nm(pump_nm: f64, signal_nm: f64) -> f64 {
    1.0 / (1.0 / pump_nm - 1.0 / signal_nm)
}

/// Quasi-phase mismatch `k_p − k_s − k_i − 2π/Λ` in rad/μm at set temperature
/// `temp_c` for signal wavelength `signal_nm`.
pub fn delta_k(signal_nm: f64, temp_c: f64, params: &PhaseMatchParams) -> f64 {
    let t = temp_c + params.temp_offset_c;
    let lp = params.pump_nm * 1e-3;
    let ls = signal_nm * 1e-3;
    let li = idler_nm(params.pump_nm, signal_nm) * 1e-3;
    let n = |l: f64| params.dispersion.n_z(l, t);
    let period = poling_period_at(params.poling_period_um, t);
    2.0 * PI * (n(lp) / lp - n(ls) / ls - n(li) / li - 1.0 / period)
}

/// Signal and idler wavelengths (nm) that phase-match at `temp_c`.
///
/// The signal is bracketed in `[0.75·λ_d, λ_d]` with `λ_d = 2·λ_p` and found
/// by bisection. Without a sign change the degenerate pair is returned as
/// long as the mismatch at `λ_d` stays inside the main lobe of the sinc
/// response (`|Δk|·L/2 < π`).
pub fn phase_matched_wavelengths(
    temp_c: f64,
    params: &PhaseMatchParams,
) -> Result<(f64, f64), PhotonicsError> {
    params.validate()?;
    if !temp_c.is_finite() {
        return Err(PhotonicsError::InvalidParameter("temperature must be finite".into()));
    }
    let degenerate = params.degenerate_nm();
    let f = |ls: f64| delta_k(ls, temp_c, params);
    let mut hi = degenerate;
    let mut lo = 0.75 * degenerate;
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_hi == 0.0 {
        return Ok((degenerate, degenerate));
    }
    if f_lo.signum() == f_hi.signum() {
        let half_length_um = params.crystal_length_mm * 1e3 / 2.0;
        if f_hi.abs() * half_length_um < PI {
            return Ok((degenerate, degenerate));
        }
        return Err(PhotonicsError::NoPhaseMatch { temp_c });
    }
    let lo_sign = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let signal = 0.5 * (lo + hi);
    Ok((signal, idler_nm(params.pump_nm, signal)))
}

/// Offset that makes the crystal degenerate at `target_c`: the root in
/// model temperature of `Δk(λ_d) = 0`, minus `target_c`.
pub fn calibrate_temp_offset(target_c: f64, params: &PhaseMatchParams) -> Result<f64, PhotonicsError> {
    params.validate()?;
    let base = PhaseMatchParams {
        temp_offset_c: 0.0,
        ..*params
    };
    let g = |t: f64| delta_k(base.degenerate_nm(), t, &base);
    let (mut lo, mut hi) = (-50.0, 200.0);
    let lo_sign = g(lo).signum();
    if lo_sign == g(hi).signum() {
        return Err(PhotonicsError::NoPhaseMatch { temp_c: target_c });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid).signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) - target_c)
}

/// One row of a temperature tuning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningPoint {
    pub temp_c: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
}

/// Tuning curve from `tmin` to `tmax` (inclusive) in steps of `step`.
pub fn tuning_curve(
    tmin: f64,
    tmax: f64,
    step: f64,
    params: &PhaseMatchParams,
) -> Result<Vec<TuningPoint>, PhotonicsError> {
    if !(tmin.is_finite() && tmax.is_finite() && step.is_finite() && step > 0.0 && tmin <= tmax) {
        return Err(PhotonicsError::InvalidParameter(
            "need finite tmin ≤ tmax and step > 0".into(),
        ));
    }
    let n = ((tmax - tmin) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let t = tmin + k as f64 * step;
            let (s, i) = phase_matched_wavelengths(t, params)?;
            Ok(TuningPoint {
                temp_c: t,
                signal_nm: s,
                idler_nm: i,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_offset_is_reproducible() {
        let p = PhaseMatchParams::default();
        let off = calibrate_temp_offset(DEGENERACY_SET_TEMP_C, &p).unwrap();
        assert!((off - DEFAULT_TEMP_OFFSET_C).abs() < 1e-9, "{off}");
    }

    #[test]
    fn degenerate_at_set_point() {
        let p = PhaseMatchParams::default();
        let (s, i) = phase_matched_wavelengths(DEGENERACY_SET_TEMP_C, &p).unwrap();
        assert!((s - 810.0).abs() < 0.5 && (i - 810.0).abs() < 0.5, "{s} {i}");
    }

    #[test]
    fn splits_when_heated() {
        let p = PhaseMatchParams::default();
        let (s, i) = phase_matched_wavelengths(40.0, &p).unwrap();
        assert!(s < 800.0 && i > 820.0, "{s} {i}");
        let err = 1.0 / s + 1.0 / i - 1.0 / 405.0;
        assert!(err.abs() < 1e-15);
    }

    #[test]
    fn far_below_degeneracy_fails() {
        let p = PhaseMatchParams::default();
        assert!(matches!(
            phase_matched_wavelengths(0.0, &p),
            Err(PhotonicsError::NoPhaseMatch { .. })
        ));
    }

    #[test]
    fn kato_calibrates_too() {
        let p = PhaseMatchParams {
            dispersion: DispersionModel::Kato,
            ..PhaseMatchParams::default()
        };
        let off = calibrate_temp_offset(DEGENERACY_SET_TEMP_C, &p).unwrap();
        let p = PhaseMatchParams {
            temp_offset_c: off,
            ..p
        };
        let (s, _) = phase_matched_wavelengths(DEGENERACY_SET_TEMP_C, &p).unwrap();
        assert!((s - 810.0).abs() < 0.5);
    }
}
