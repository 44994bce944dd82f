//! Stochastic disturbances of the free-space channel.
//!
//! Three independent processes act on the received beam:
//!
//! - **beam wander**: a two-axis first-order Gauss-Markov (Ornstein-Uhlenbeck)
//!   displacement of the focal-plane centroid, advanced with the exact
//!   discretization `x' = a·x + σ·√(1−a²)·z`, `a = exp(−2π·f_c·dt)`;
//! - **thermal drift**: a deterministic offset proportional to the excursion
//!   of the outdoor temperature from a reference value;
//! - **scintillation**: a lognormal transmittance factor whose log follows its
//!   own Gauss-Markov process, normalized so its mean is exactly one.
//!
//! All functions are pure: state goes in, the next state comes out.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{windowed_variance_ratio, FWHM_PER_SIGMA};
use crate::vec2::Vec2;

#[derive(Debug, Error)]
pub enum TurbulenceError {
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("temperature profile line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to read temperature profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Target width of the uncorrected wander histogram, μm FWHM.
pub const CALIBRATION_FWHM_UM: f64 = 350.0;
/// Observation window the default wander amplitude is calibrated for, s.
pub const CALIBRATION_WINDOW_S: f64 = 30.0;
/// Default wander correlation bandwidth, Hz.
pub const DEFAULT_WANDER_BANDWIDTH_HZ: f64 = 0.15;


/// Parameters of the two-axis beam-wander process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WanderParams {
    /// Stationary standard deviation of the x centroid offset, μm.
    pub sigma_x_um: f64,
    /// Stationary standard deviation of the y centroid offset, μm.
    pub sigma_y_um: f64,
    /// Correlation bandwidth, Hz. Correlation time is `1/(2π·bandwidth_hz)`.
    pub bandwidth_hz: f64,
}

impl Default for WanderParams {
    fn default() -> Self {
        let sigma = calibrated_wander_sigma(
            CALIBRATION_FWHM_UM,
            DEFAULT_WANDER_BANDWIDTH_HZ,
            CALIBRATION_WINDOW_S,
        );
        Self {
            sigma_x_um: sigma,
            sigma_y_um: sigma,
            bandwidth_hz: DEFAULT_WANDER_BANDWIDTH_HZ,
        }
    }
}

impl WanderParams {
    pub fn validate(&self) -> Result<(), TurbulenceError> {
        if !(self.sigma_x_um.is_finite() && self.sigma_x_um >= 0.0)
            || !(self.sigma_y_um.is_finite() && self.sigma_y_um >= 0.0)
        {
            return Err(TurbulenceError::RejectedInput(
                "wander sigma must be finite and non-negative".into(),
            ));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(TurbulenceError::RejectedInput(
                "wander bandwidth must be finite and positive".into(),
            ));
        }
        Ok(())
    }

    pub fn correlation_time_s(&self) -> f64 {
        1.0 / (2.0 * PI * self.bandwidth_hz)
    }

    pub fn sigma(&self) -> Vec2 {
        Vec2::new(self.sigma_x_um, self.sigma_y_um)
    }

    /// Draws an offset from the stationary distribution.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        Vec2::new(self.sigma_x_um * zx, self.sigma_y_um * zy)
    }
}

/// Per-axis stationary sigma whose expected windowed histogram width equals
/// `fwhm_um`.
///
/// A finite window of a correlated process under-samples its variance: the
/// expected sample variance (mean removed) is `σ²·r(λT)` with `λ = 2π·f_c`,
/// see [`windowed_variance_ratio`]. The returned sigma compensates that bias.
pub fn calibrated_wander_sigma(fwhm_um: f64, bandwidth_hz: f64, window_s: f64) -> f64 {
    let ratio = windowed_variance_ratio(2.0 * PI * bandwidth_hz, window_s);
    fwhm_um / FWHM_PER_SIGMA / ratio.sqrt()
}

/// One exact step of a zero-mean first-order Gauss-Markov process with
/// stationary deviation `sigma` and correlation bandwidth `bandwidth_hz`,
/// driven by the standard normal draw `z`.
pub fn gauss_markov_step(x: f64, dt: f64, sigma: f64, bandwidth_hz: f64, z: f64) -> f64 {
    let a = (-2.0 * PI * bandwidth_hz * dt).exp();
    a * x + sigma * (1.0 - a * a).sqrt() * z
}

/// Advances the wander offset by `dt` seconds.
///
/// Two standard normal draws are consumed per call regardless of the
/// parameters, so the random stream stays aligned across configurations.
pub fn sample_wander<R: Rng + ?Sized>(
    state: Vec2,
    dt: f64,
    params: &WanderParams,
    rng: &mut R,
) -> Result<Vec2, TurbulenceError> {
    if !state.is_finite() {
        return Err(TurbulenceError::RejectedInput("non-finite wander state".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TurbulenceError::RejectedInput(format!("dt must be > 0, got {dt}")));
    }
    params.validate()?;
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    Ok(Vec2::new(
        gauss_markov_step(state.x, dt, params.sigma_x_um, params.bandwidth_hz, zx),
        gauss_markov_step(state.y, dt, params.sigma_y_um, params.bandwidth_hz, zy),
    ))
}

/// Outdoor temperature as a function of time, linearly interpolated between
/// samples and clamped at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TempProfile {
    samples: Vec<(f64, f64)>,
}

const DAY_PROFILE: &str = include_str!("../profiles/day.csv");
const NIGHT_PROFILE: &str = include_str!("../profiles/night.csv");

impl TempProfile {
    /// Builds a profile from `(time_s, temperature_C)` pairs.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, TurbulenceError> {
        if samples.is_empty() {
            return Err(TurbulenceError::Config("empty temperature profile".into()));
        }
        for (i, &(t, temp)) in samples.iter().enumerate() {
            if !t.is_finite() || !temp.is_finite() {
                return Err(TurbulenceError::Config(format!(
                    "non-finite profile sample at index {i}"
                )));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(TurbulenceError::Config(format!(
                    "profile times must be strictly increasing (index {i})"
                )));
            }
        }
        Ok(Self { samples })
    }

    /// Constant temperature over all time.
    pub fn constant(temperature_c: f64) -> Self {
        Self {
            samples: vec![(0.0, temperature_c)],
        }
    }

    /// Parses two-column text: `time_s, temperature_C` per line, comma or
    /// whitespace separated. A single non-numeric header line is allowed;
    /// blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TurbulenceError> {
        let mut samples = Vec::new();
        let mut seen_content = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed = match fields.as_slice() {
                [a, b] => a.parse::<f64>().and_then(|t| b.parse::<f64>().map(|v| (t, v))),
                _ => {
                    return Err(TurbulenceError::Parse {
                        line: idx + 1,
                        message: format!("expected 2 columns, found {}", fields.len()),
                    })
                }
            };
            match parsed {
                Ok(pair) => samples.push(pair),
                Err(_) if !seen_content => {}
                Err(e) => {
                    return Err(TurbulenceError::Parse {
                        line: idx + 1,
                        message: e.to_string(),
                    })
                }
            }
            seen_content = true;
        }
        Self::new(samples)
    }

    /// Loads a profile file, or one of the bundled profiles when `source` is
    /// `builtin:day` or `builtin:night`.
    pub fn load(source: &str) -> Result<Self, TurbulenceError> {
        match source {
            "builtin:day" => Self::parse(DAY_PROFILE),
            "builtin:night" => Self::parse(NIGHT_PROFILE),
            path if path.starts_with("builtin:") => Err(TurbulenceError::Config(format!(
                "unknown builtin profile {path:?} (expected builtin:day or builtin:night)"
            ))),
            path => {
                let text =
                    std::fs::read_to_string(Path::new(path)).map_err(|source| TurbulenceError::Io {
                        path: path.to_string(),
                        source,
                    })?;
                Self::parse(&text)
            }
        }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    pub fn temperature_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].0 {
            return s[0].1;
        }
        let last = s[s.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let hi = s.partition_point(|&(ts, _)| ts <= t);
        let (t0, v0) = s[hi - 1];
        let (t1, v1) = s[hi];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

impl fmt::Display for TempProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "time_s,temperature_c")?;
        for (t, v) in &self.samples {
            writeln!(f, "{t},{v}")?;
        }
        Ok(())
    }
}

/// Sensitivity of the centroid to temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftParams {
    /// Drift per degree of excursion, μm/°C, per axis.
    pub gain_um_per_c: Vec2,
    /// Temperature at which the drift offset is zero, °C.
    pub reference_temp_c: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        // Calibration choice: the drift magnitude is not quantified beyond
        // "leaves the telescope field over an afternoon".
        Self {
            gain_um_per_c: Vec2::new(150.0, 60.0),
            reference_temp_c: 12.0,
        }
    }
}

impl DriftParams {
    pub fn validate(&self) -> Result<(), TurbulenceError> {
        if !self.gain_um_per_c.is_finite() || !self.reference_temp_c.is_finite() {
            return Err(TurbulenceError::RejectedInput("drift parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Thermal drift offset at time `t`, μm. Times outside the profile clamp to
/// its end values.
pub fn drift_at(t: f64, profile: &TempProfile, params: &DriftParams) -> Vec2 {
    let excursion = profile.temperature_at(t) - params.reference_temp_c;
    params.gain_um_per_c * excursion
}

/// Parameters of the lognormal scintillation process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScintillationParams {
    /// Standard deviation of the log transmittance.
    pub log_sigma: f64,
    /// Correlation bandwidth, Hz.
    pub bandwidth_hz: f64,
}

impl Default for ScintillationParams {
    fn default() -> Self {
        Self {
            log_sigma: 0.1,
            bandwidth_hz: 50.0,
        }
    }
}

impl ScintillationParams {
    pub fn validate(&self) -> Result<(), TurbulenceError> {
        if !(self.log_sigma.is_finite() && self.log_sigma >= 0.0) {
            return Err(TurbulenceError::RejectedInput(
                "log_sigma must be finite and non-negative".into(),
            ));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(TurbulenceError::RejectedInput(
                "scintillation bandwidth must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Log-amplitude deviation of the scintillation process.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScintillationState(pub f64);

impl ScintillationState {
    pub fn stationary<R: Rng + ?Sized>(params: &ScintillationParams, rng: &mut R) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Self(params.log_sigma * z)
    }

    /// Transmittance factor `exp(X − s²/2)`; unit mean under the stationary law.
    pub fn factor(self, params: &ScintillationParams) -> f64 {
        (self.0 - 0.5 * params.log_sigma * params.log_sigma).exp()
    }
}

/// Advances the scintillation state by `dt` seconds and returns the new state
/// together with its transmittance factor.
pub fn sample_scintillation<R: Rng + ?Sized>(
    state: ScintillationState,
    dt: f64,
    params: &ScintillationParams,
    rng: &mut R,
) -> Result<(ScintillationState, f64), TurbulenceError> {
    if !state.0.is_finite() {
        return Err(TurbulenceError::RejectedInput("non-finite scintillation state".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TurbulenceError::RejectedInput(format!("dt must be > 0, got {dt}")));
    }
    params.validate()?;
    let z: f64 = rng.sample(StandardNormal);
    let next = ScintillationState(gauss_markov_step(
        state.0,
        dt,
        params.log_sigma,
        params.bandwidth_hz,
        z,
    ));
    Ok((next, next.factor(params)))
}
