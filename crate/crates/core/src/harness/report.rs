use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifacts::{files, write_json, ArtifactSet};
use super::run::photon_timeline;
use super::{HarnessError, ScenarioConfig};
use crate::control::{CoarseEvent, CoarseStatus, TraceLog};
use crate::correlation::{
    centroid_spread, coincidence_histogram, far_region_stats, fit_gaussian, g2_normalize,
    subtract_accidentals, G2Histogram, GaussianFit, SpreadFit,
};
use crate::netlink::BridgeStats;
use crate::photonics::{phase_matched_wavelengths, ChannelTally};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamReport {
    /// Trailing window of each loop run used for the spread fits, s.
    pub window_s: f64,
    pub uncorrected_fwhm_um: f64,
    pub corrected_fwhm_um: f64,
    /// Uncorrected over corrected FWHM.
    pub suppression_ratio: f64,
    pub uncorrected: SpreadFit,
    pub corrected: SpreadFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// Over the whole corrected run.
    pub mean_eta: f64,
    pub std_eta: f64,
    pub min_eta: f64,
    pub max_eta: f64,
    /// Mean of η·scintillation over the photon window.
    pub photon_window_transmittance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReconciliation {
    pub source_signal_rate: f64,
    pub free_space_loss: f64,
    pub transceiver_loss: f64,
    /// Fitted value before clamping, when calibration ran.
    pub extra_loss_unclamped: Option<f64>,
    pub extra_loss: f64,
    pub mean_transmittance: f64,
    pub detector_efficiency: f64,
    /// Product of every factor above.
    pub total_transmission: f64,
    pub predicted_receiver_rate: f64,
    pub measured_receiver_rate: f64,
    pub target_receiver_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonReport {
    pub duration_s: f64,
    /// Phase-matched signal and idler wavelengths at the set temperature, nm.
    pub signal_nm: Option<f64>,
    pub idler_nm: Option<f64>,
    pub pair_rate: f64,
    pub signal_tally: ChannelTally,
    pub idler_tally: ChannelTally,
    /// Pair photons reaching the receiver detector, before dead time, /s.
    pub receiver_signal_rate: f64,
    /// All recorded signal clicks, /s.
    pub signal_singles_rate: f64,
    pub idler_singles_rate: f64,
    pub losses: LossReconciliation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Report {
    pub bin_width_ps: u64,
    pub tau_range_ps: u64,
    pub far_from_ps: u64,
    pub coincidences: u64,
    pub accidentals_per_bin: f64,
    pub peak_tau_ps: i64,
    pub peak_raw: f64,
    pub peak_subtracted: f64,
    /// Mean raw g² over the far region, the subtracted floor.
    pub floor: f64,
    pub floor_stderr: f64,
    /// Gaussian fit of the subtracted series against τ in ps.
    pub fit: Option<GaussianFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub coarse_commands: u64,
    pub coarse_applied: u64,
    pub coarse_failed: u64,
    pub coarse_busy: u64,
    pub coarse_pending: u64,
    pub coarse_warnings: u64,
    pub pid_faults: u64,
    pub beam_lost_steps: u64,
}

/// Summary of one run. Everything except `wall_clock_s` is a function of
/// the persisted artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub wall_clock_s: f64,
    pub beam: BeamReport,
    pub coupling: CouplingReport,
    pub photons: PhotonReport,
    pub g2: G2Report,
    pub control: ControlReport,
    pub netlink: Option<BridgeStats>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Copy with the wall-clock field zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_s: 0.0,
            ..self.clone()
        }
    }
}

fn spread(trace: &TraceLog, cfg: &ScenarioConfig, which: &str) -> Result<SpreadFit, HarnessError> {
    let t0 = cfg.duration_s - cfg.analysis.fwhm_window_s;
    let rows = trace.since(t0 - 0.5 / cfg.control.sim_rate_hz);
    let xs: Vec<f64> = rows.iter().map(|r| r.psd.x * 1e3).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.psd.y * 1e3).collect();
    centroid_spread(&xs, &ys)
        .map_err(|e| HarnessError::runtime("correlation", format!("{which} beam spread: {e}")))
}

fn control_report(events: &[CoarseEvent], set: &ArtifactSet) -> ControlReport {
    let count = |s: CoarseStatus| events.iter().filter(|e| e.status == s).count() as u64;
    ControlReport {
        coarse_commands: events.iter().filter(|e| e.status != CoarseStatus::Busy).count() as u64,
        coarse_applied: count(CoarseStatus::Applied),
        coarse_failed: count(CoarseStatus::Failed),
        coarse_busy: count(CoarseStatus::Busy),
        coarse_pending: count(CoarseStatus::Pending),
        coarse_warnings: set.stats.coarse_warnings,
        pid_faults: set.stats.pid_faults,
        beam_lost_steps: set.stats.beam_lost_steps,
    }
}

/// Computes the report and the normalized histogram from persisted inputs.
pub fn analyze(set: &ArtifactSet, wall_clock_s: f64) -> Result<(RunReport, G2Histogram), HarnessError> {
    let cfg = &set.config;
    let hash = cfg.hash();

    let uncorrected = spread(&set.uncorrected, cfg, "uncorrected")?;
    let corrected = spread(&set.corrected, cfg, "corrected")?;
    let beam = BeamReport {
        window_s: cfg.analysis.fwhm_window_s,
        uncorrected_fwhm_um: uncorrected.fwhm,
        corrected_fwhm_um: corrected.fwhm,
        suppression_ratio: uncorrected.fwhm / corrected.fwhm,
        uncorrected,
        corrected,
    };

    let etas: Vec<f64> = set.corrected.rows.iter().map(|r| r.eta).collect();
    if etas.is_empty() {
        return Err(HarnessError::runtime("harness", "corrected trace is empty"));
    }
    let timeline = photon_timeline(&set.corrected, cfg)?;
    let window_t = timeline.mean();
    let coupling = CouplingReport {
        mean_eta: mean(&etas),
        std_eta: std_dev(&etas),
        min_eta: etas.iter().copied().fold(f64::INFINITY, f64::min),
        max_eta: etas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        photon_window_transmittance: window_t,
    };

    let p = &cfg.photonics;
    let pd = p.duration_s;
    let wavelengths = phase_matched_wavelengths(p.phase_match.temp_c, &p.phase_match).ok();
    let extra = set.stats.extra_loss;
    let total = (1.0 - p.losses.free_space_loss)
        * (1.0 - p.losses.transceiver_loss)
        * (1.0 - extra)
        * window_t
        * p.signal_detector.efficiency;
    let receiver = set.stats.signal_tally.survived as f64 / pd;
    let photons = PhotonReport {
        duration_s: pd,
        signal_nm: wavelengths.map(|w| w.0),
        idler_nm: wavelengths.map(|w| w.1),
        pair_rate: p.source.pair_rate(),
        signal_tally: set.stats.signal_tally,
        idler_tally: set.stats.idler_tally,
        receiver_signal_rate: receiver,
        signal_singles_rate: set.signal.rate(),
        idler_singles_rate: set.idler.rate(),
        losses: LossReconciliation {
            source_signal_rate: p.source.source_signal_rate,
            free_space_loss: p.losses.free_space_loss,
            transceiver_loss: p.losses.transceiver_loss,
            extra_loss_unclamped: set.stats.extra_loss_fit.map(|f| f.unclamped),
            extra_loss: extra,
            mean_transmittance: window_t,
            detector_efficiency: p.signal_detector.efficiency,
            total_transmission: total,
            predicted_receiver_rate: p.source.source_signal_rate * total,
            measured_receiver_rate: receiver,
            target_receiver_rate: p.target_receiver_rate,
        },
    };

    let c = &cfg.correlation;
    let corr = |e: crate::correlation::CorrelationError| HarnessError::runtime("correlation", e);
    let raw = coincidence_histogram(&set.signal, &set.idler, c.bin_width_ps, c.tau_range_ps).map_err(corr)?;
    let normalized = g2_normalize(&raw).map_err(corr)?;
    let hist = subtract_accidentals(&normalized, c.far_from_ps).map_err(corr)?;
    let g2_raw = hist.g2.as_deref().expect("normalized");
    let (floor, floor_stderr) = far_region_stats(g2_raw, &hist, c.far_from_ps).ok_or(
        HarnessError::runtime("correlation", "no flat region for the accidental floor"),
    )?;
    let (peak_tau_ps, peak_subtracted) = hist.peak().expect("non-empty histogram");
    let peak_bin = hist.taus_ps().iter().position(|&t| t == peak_tau_ps).expect("peak bin");
    let taus: Vec<f64> = hist.taus_ps().iter().map(|&t| t as f64).collect();
    let fit = fit_gaussian(&taus, hist.g2_subtracted.as_deref().expect("subtracted")).ok();
    let g2 = G2Report {
        bin_width_ps: c.bin_width_ps,
        tau_range_ps: c.tau_range_ps,
        far_from_ps: c.far_from_ps,
        coincidences: hist.total(),
        accidentals_per_bin: hist.accidental_level(),
        peak_tau_ps,
        peak_raw: g2_raw[peak_bin],
        peak_subtracted,
        floor,
        floor_stderr,
        fit,
    };

    let report = RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_hash: hash,
        wall_clock_s,
        beam,
        coupling,
        photons,
        g2,
        control: control_report(&set.coarse_events, set),
        netlink: set.stats.bridge,
    };
    Ok((report, hist))
}

/// Rebuilds the report of a finished run from its directory. The wall-clock
/// field is copied from the stored report when there is one.
pub fn regenerate_report(dir: &Path) -> Result<RunReport, HarnessError> {
    let set = ArtifactSet::load(dir)?;
    let stored = std::fs::read_to_string(dir.join(files::REPORT))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v.get("wall_clock_s").and_then(|w| w.as_f64()))
        .unwrap_or(0.0);
    Ok(analyze(&set, stored)?.0)
}

pub(crate) fn write_report(dir: &Path, report: &RunReport) -> Result<(), HarnessError> {
    write_json(&dir.join(files::REPORT), report)
}
