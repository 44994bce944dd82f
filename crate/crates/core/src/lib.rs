//! Simulation and analysis of a retro-reflected free-space link that carries
//! one photon of each SPDC pair over the air and keeps its partner at home.
//!
//! The crate is organized along the signal path:
//!
//! - [`turbulence`]: beam wander, thermal drift and scintillation.
//! - [`plant`]: position-sensitive detector, fast steering mirror, remote
//!   hexapod, beam geometry and fiber coupling.
//! - [`control`]: the fine PID loop, the coarse aligner and the co-simulation
//!   that ties them to the plant.
//! - [`netlink`]: the lossy wireless bridge that carries coarse moves to the
//!   reflector.
//! - [`photonics`]: phase matching, pair generation, the loss chain and the
//!   detectors.
//! - [`correlation`]: coincidence histograms, g², and Gaussian fits.
//! - [`harness`]: scenario files, the end-to-end runner and its report.
//!
//! ```
//! use qfso::harness::{simulate, analyze, ScenarioConfig};
//!
//! let mut cfg = ScenarioConfig::builtin("fast-ci").unwrap();
//! cfg.duration_s = 1.0;
//! cfg.analysis.fwhm_window_s = 1.0;
//! cfg.photonics.duration_s = 0.2;
//! let set = simulate(&cfg).unwrap();
//! let (report, _) = analyze(&set, 0.0).unwrap();
//! assert!(report.beam.corrected_fwhm_um < report.beam.uncorrected_fwhm_um);
//! ```

pub mod control;
pub mod correlation;
pub mod harness;
pub mod netlink;
pub mod photonics;
pub mod plant;
pub mod rng;
pub mod stats;
pub mod turbulence;
pub mod vec2;

pub use harness::{run_scenario, RunReport, ScenarioConfig};
pub use vec2::Vec2;

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/disturbances.md")]
    mod disturbances {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/bridge.md")]
    mod bridge {}
    #[doc = include_str!("../../../book/src/photonics.md")]
    mod photonics {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
