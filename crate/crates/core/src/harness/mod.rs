//! Scenario files, the end-to-end runner, persisted artifacts, and the run
//! report.
//!
//! A run is: corrected and uncorrected loop simulations with one seed, photon
//! generation over the tail of the corrected run using its η(t)·scintillation
//! timeline, then coincidence analysis. Every number in [`RunReport`] is
//! recomputed by [`analyze`] from the files written to the run directory, so
//! [`regenerate_report`] reproduces it exactly.

mod artifacts;
mod config;
mod report;
mod run;

pub use artifacts::{
    read_coarse_events, write_coarse_events, ArtifactSet, RunStats, files, FAILED_MARKER,
};
pub use config::{
    AnalysisSection, ControlSection, CorrelationSection, FeedbackConfig, NetlinkSection,
    PhotonicsSection, ScenarioConfig, TurbulenceConfig, BUILTIN_SCENARIOS, OUTPUT_ROOT_ENV,
};
pub use report::{
    analyze, regenerate_report, BeamReport, ControlReport, CouplingReport, G2Report,
    LossReconciliation, PhotonReport, RunReport,
};
pub use run::{calibrate_eta0, photon_timeline, run_scenario, simulate, Eta0Calibration};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("[{module}] invalid config: {message}")]
    Invalid { module: &'static str, message: String },
    #[error("[{module}] {message}")]
    Runtime { module: &'static str, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl HarnessError {
    /// True for problems with the input rather than failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::ConfigRead { .. } | HarnessError::Parse(_) | HarnessError::Invalid { .. }
        )
    }

    pub(crate) fn runtime(module: &'static str, e: impl std::fmt::Display) -> Self {
        HarnessError::Runtime {
            module,
            message: e.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        HarnessError::Artifact {
            path: path.into(),
            message: e.to_string(),
        }
    }
}
