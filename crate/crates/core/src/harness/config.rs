use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::control::{
    CoarseConfig, Disturbances, LoopConfig, LoopSetup, PidConfig, PlantConfig,
};
use crate::correlation::{DEFAULT_BIN_WIDTH_PS, DEFAULT_FAR_FROM_PS, DEFAULT_TAU_RANGE_PS};
use crate::netlink::ChannelParams;
use crate::photonics::{DetectorParams, LossBudget, PhaseMatchParams, SpdcSourceParams};
use crate::turbulence::{DriftParams, ScintillationParams, TempProfile, WanderParams};
use crate::vec2::Vec2;

/// Environment variable naming the directory under which runs are written
/// when a scenario does not set `output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "QFSO_OUTPUT_ROOT";

const PAPER_DEFAULT: &str = include_str!("../../scenarios/paper-default.toml");
const FAST_CI: &str = include_str!("../../scenarios/fast-ci.toml");

/// Names accepted by [`ScenarioConfig::load`] with a `builtin:` prefix.
pub const BUILTIN_SCENARIOS: [&str; 2] = ["paper-default", "fast-ci"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    pub fine: bool,
    pub coarse: bool,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            fine: true,
            coarse: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbulenceConfig {
    /// `builtin:day`, `builtin:night`, or a path to a profile file.
    pub profile: String,
    /// Profile time at the start of the run, s.
    pub profile_start_s: f64,
    pub wander: WanderParams,
    pub drift: DriftParams,
    pub scintillation: ScintillationParams,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        Self {
            profile: "builtin:day".into(),
            profile_start_s: 0.0,
            wander: WanderParams::default(),
            drift: DriftParams::default(),
            scintillation: ScintillationParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub sim_rate_hz: f64,
    /// Reflector tilt at the start of the run, μrad.
    pub initial_hexapod_urad: Vec2,
    pub pid: PidConfig,
    pub coarse: CoarseConfig,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            sim_rate_hz: 1000.0,
            initial_hexapod_urad: Vec2::ZERO,
            pid: PidConfig::default(),
            coarse: CoarseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetlinkSection {
    /// Route coarse moves over the simulated bridge; otherwise apply them
    /// directly.
    pub enabled: bool,
    pub channel: ChannelParams,
}

impl Default for NetlinkSection {
    fn default() -> Self {
        Self {
            enabled: true,
            channel: ChannelParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotonicsSection {
    /// Length of photon data, taken from the end of the loop run, s.
    pub duration_s: f64,
    /// Photons are generated and detected in blocks of this length, s.
    pub block_s: f64,
    pub source: SpdcSourceParams,
    pub phase_match: PhaseMatchParams,
    pub losses: LossBudget,
    /// Replace `losses.extra_loss` by the value that brings the receiver
    /// rate to `target_receiver_rate`.
    pub calibrate_extra_loss: bool,
    pub target_receiver_rate: f64,
    pub signal_detector: DetectorParams,
    pub idler_detector: DetectorParams,
}

impl Default for PhotonicsSection {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            block_s: 1.0,
            source: SpdcSourceParams::default(),
            phase_match: PhaseMatchParams::default(),
            losses: LossBudget::default(),
            calibrate_extra_loss: true,
            target_receiver_rate: 5.5e4,
            signal_detector: DetectorParams::default(),
            idler_detector: DetectorParams {
                background_rate: 500.0,
                ..DetectorParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationSection {
    pub bin_width_ps: u64,
    pub tau_range_ps: u64,
    /// Bins with |τ| beyond this form the accidental floor, ps.
    pub far_from_ps: u64,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self {
            bin_width_ps: DEFAULT_BIN_WIDTH_PS,
            tau_range_ps: DEFAULT_TAU_RANGE_PS,
            far_from_ps: DEFAULT_FAR_FROM_PS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Trailing part of the loop run used for centroid-spread fits, s.
    pub fwhm_window_s: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { fwhm_window_s: 30.0 }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    #[serde(default)]
    pub turbulence: TurbulenceConfig,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub netlink: NetlinkSection,
    #[serde(default)]
    pub photonics: PhotonicsSection,
    #[serde(default)]
    pub correlation: CorrelationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_name() -> String {
    "scenario".into()
}

fn invalid(module: &'static str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Invalid {
        module,
        message: e.to_string(),
    }
}

impl ScenarioConfig {
    pub fn builtin(name: &str) -> Result<Self, HarnessError> {
        let text = match name {
            "paper-default" => PAPER_DEFAULT,
            "fast-ci" => FAST_CI,
            other => {
                return Err(HarnessError::Invalid {
                    module: "harness",
                    message: format!(
                        "unknown builtin scenario {other:?}; expected one of {BUILTIN_SCENARIOS:?}"
                    ),
                })
            }
        };
        Self::from_toml_str(text)
    }

    /// Reads `builtin:<name>` or a TOML file, then validates it.
    pub fn load(source: &str) -> Result<Self, HarnessError> {
        if let Some(name) = source.strip_prefix("builtin:") {
            return Self::builtin(name);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::ConfigRead {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative profile paths are relative to the config file
        if !cfg.turbulence.profile.starts_with("builtin:") {
            let p = Path::new(&cfg.turbulence.profile);
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.turbulence.profile = dir.join(p).to_string_lossy().into_owned();
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: None,
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("harness", "duration_s must be > 0"));
        }
        let t = &self.turbulence;
        t.wander.validate().map_err(|e| invalid("turbulence", e))?;
        t.drift.validate().map_err(|e| invalid("turbulence", e))?;
        t.scintillation.validate().map_err(|e| invalid("turbulence", e))?;
        if !t.profile_start_s.is_finite() {
            return Err(invalid("turbulence", "profile_start_s must be finite"));
        }
        self.plant.validate().map_err(|e| invalid("plant", e))?;
        self.control.pid.validate().map_err(|e| invalid("control", e))?;
        self.control.coarse.validate().map_err(|e| invalid("control", e))?;
        let setup = LoopSetup {
            plant: self.plant,
            disturbances: Disturbances::quiet(),
            pid: self.control.pid,
            coarse: self.control.coarse,
            sim: self.loop_config(),
        };
        setup.validate().map_err(|e| invalid("control", e))?;
        self.netlink.channel.validate().map_err(|e| invalid("netlink", e))?;
        let p = &self.photonics;
        p.source.validate().map_err(|e| invalid("photonics", e))?;
        p.phase_match.validate().map_err(|e| invalid("photonics", e))?;
        p.losses.validate().map_err(|e| invalid("photonics", e))?;
        p.signal_detector.validate().map_err(|e| invalid("photonics", e))?;
        p.idler_detector.validate().map_err(|e| invalid("photonics", e))?;
        if !(p.duration_s.is_finite() && p.duration_s > 0.0 && p.duration_s <= self.duration_s) {
            return Err(invalid(
                "photonics",
                "photon duration_s must be > 0 and no longer than the run",
            ));
        }
        if !(p.block_s.is_finite() && p.block_s > 0.0) {
            return Err(invalid("photonics", "block_s must be > 0"));
        }
        if !(p.target_receiver_rate.is_finite() && p.target_receiver_rate >= 0.0) {
            return Err(invalid("photonics", "target_receiver_rate must be ≥ 0"));
        }
        let c = &self.correlation;
        if c.bin_width_ps == 0 || c.tau_range_ps % c.bin_width_ps != 0 {
            return Err(invalid(
                "correlation",
                "tau_range_ps must be a positive multiple of bin_width_ps",
            ));
        }
        if c.far_from_ps >= c.tau_range_ps {
            return Err(invalid(
                "correlation",
                "far_from_ps must lie inside tau_range_ps so a flat region exists",
            ));
        }
        let w = self.analysis.fwhm_window_s;
        if !(w.is_finite() && w > 0.0 && w <= self.duration_s) {
            return Err(invalid("harness", "fwhm_window_s must be in (0, duration_s]"));
        }
        Ok(())
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            sim_rate_hz: self.control.sim_rate_hz,
            fine_enabled: self.feedback.fine,
            coarse_enabled: self.feedback.coarse,
            initial_hexapod_urad: self.control.initial_hexapod_urad,
        }
    }

    pub fn temp_profile(&self) -> Result<TempProfile, HarnessError> {
        TempProfile::load(&self.turbulence.profile).map_err(|e| invalid("turbulence", e))
    }

    /// Loop setup with the feedback switches of this scenario.
    pub fn loop_setup(&self) -> Result<LoopSetup, HarnessError> {
        Ok(LoopSetup {
            plant: self.plant,
            disturbances: Disturbances {
                wander: self.turbulence.wander,
                drift: self.turbulence.drift,
                profile: self.temp_profile()?,
                profile_start_s: self.turbulence.profile_start_s,
                scintillation: self.turbulence.scintillation,
            },
            pid: self.control.pid,
            coarse: self.control.coarse,
            sim: self.loop_config(),
        })
    }

    /// Where this run writes its artifacts: an explicit override, else
    /// `output_dir`, else `$QFSO_OUTPUT_ROOT/<name>-<seed>`, else
    /// `qfso-runs/<name>-<seed>` under the working directory.
    pub fn resolve_output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        if let Some(dir) = override_dir {
            return dir.to_path_buf();
        }
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        let leaf = format!("{}-{}", self.name, self.seed);
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(leaf),
            _ => PathBuf::from("qfso-runs").join(leaf),
        }
    }
}
