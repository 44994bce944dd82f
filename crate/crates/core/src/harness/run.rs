use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::artifacts::{
    files, write_coarse, write_json, write_stream, write_text, write_trace, ArtifactSet, RunStats,
    FAILED_MARKER,
};
use super::report::{analyze, write_report, RunReport};
use super::{HarnessError, ScenarioConfig};
use crate::control::{run_closed_loop, ControlError, HexapodLink, LoopOutcome, TraceLog};
use crate::netlink::{Bridge, Channel, LossyChannel};
use crate::photonics::{
    apply_channel_block, calibrate_extra_loss, ChannelTally, DetectorCarry, DetectorChannel,
    LossBudget, PairGenerator, PhotonEventStream, PhotonicsError, TransmittanceTimeline,
};
use crate::rng::{stream_rng, Stream};
use crate::stats::mean;

fn control_err(e: ControlError) -> HarnessError {
    let module = match e {
        ControlError::Plant(_) => "plant",
        ControlError::Turbulence(_) => "turbulence",
        ControlError::Netlink(_) => "netlink",
        _ => "control",
    };
    HarnessError::runtime(module, e)
}

fn photonics_err(e: PhotonicsError) -> HarnessError {
    HarnessError::runtime("photonics", e)
}

fn hexapod_link(cfg: &ScenarioConfig) -> HexapodLink {
    if cfg.netlink.enabled {
        let params = cfg.netlink.channel;
        let channel: Box<dyn Channel + Send> =
            Box::new(LossyChannel::new(params, stream_rng(cfg.seed, Stream::Netlink)));
        HexapodLink::Bridge(Bridge::new(channel, params))
    } else {
        HexapodLink::Direct
    }
}

/// Loop run with the scenario's feedback switches.
fn corrected_loop(cfg: &ScenarioConfig) -> Result<LoopOutcome, HarnessError> {
    let setup = cfg.loop_setup()?;
    run_closed_loop(&setup, cfg.duration_s, cfg.seed, &mut hexapod_link(cfg)).map_err(control_err)
}

/// Same atmosphere with both tiers off.
fn uncorrected_loop(cfg: &ScenarioConfig) -> Result<LoopOutcome, HarnessError> {
    let mut setup = cfg.loop_setup()?;
    setup.sim.fine_enabled = false;
    setup.sim.coarse_enabled = false;
    run_closed_loop(&setup, cfg.duration_s, cfg.seed, &mut HexapodLink::Direct).map_err(control_err)
}

/// Link transmittance η·scintillation over the last `photonics.duration_s`
/// of the corrected run, re-based so the photon window starts at 0.
pub fn photon_timeline(trace: &TraceLog, cfg: &ScenarioConfig) -> Result<TransmittanceTimeline, HarnessError> {
    let dt = 1.0 / cfg.control.sim_rate_hz;
    let start = cfg.duration_s - cfg.photonics.duration_s;
    let values: Vec<f64> = trace
        .since(start - 0.5 * dt)
        .iter()
        .map(|r| (r.eta * r.scint).clamp(0.0, 1.0))
        .collect();
    TransmittanceTimeline::new(0.0, dt, values).map_err(photonics_err)
}

struct Photons {
    signal: PhotonEventStream,
    idler: PhotonEventStream,
    signal_tally: ChannelTally,
    idler_tally: ChannelTally,
    extra_loss_fit: Option<crate::photonics::ExtraLossFit>,
    extra_loss: f64,
}

fn photons(cfg: &ScenarioConfig, corrected: &TraceLog) -> Result<Photons, HarnessError> {
    let p = &cfg.photonics;
    let duration = p.duration_s;
    let timeline = photon_timeline(corrected, cfg)?;
    let mut losses = p.losses;
    let extra_loss_fit = p.calibrate_extra_loss.then(|| {
        let fit = calibrate_extra_loss(
            p.source.source_signal_rate,
            p.target_receiver_rate,
            timeline.mean(),
            p.signal_detector.efficiency,
            &p.losses,
        );
        losses.extra_loss = fit.extra_loss;
        fit
    });
    let herald = TransmittanceTimeline::constant(p.source.heralding_efficiency);

    let mut pair_rng = stream_rng(cfg.seed, Stream::PairEmission);
    let mut signal_rng = stream_rng(cfg.seed, Stream::SignalChannel);
    let mut idler_rng = stream_rng(cfg.seed, Stream::IdlerChannel);
    let mut generator = PairGenerator::new(p.source, duration, &mut pair_rng).map_err(photonics_err)?;
    let mut signal = PhotonEventStream::new(DetectorChannel::Signal, duration);
    let mut idler = PhotonEventStream::new(DetectorChannel::Idler, duration);
    let (mut signal_carry, mut idler_carry) = (DetectorCarry::default(), DetectorCarry::default());
    let (mut signal_tally, mut idler_tally) = (ChannelTally::default(), ChannelTally::default());

    let blocks = (duration / p.block_s).ceil() as usize;
    for b in 0..blocks {
        let t0 = b as f64 * p.block_s;
        let t1 = ((b + 1) as f64 * p.block_s).min(duration);
        let pairs = generator.block(t1);
        let (clicks, tally) = apply_channel_block(
            &pairs.signal.timestamps_ps,
            t0,
            t1,
            duration,
            &losses,
            &timeline,
            &p.signal_detector,
            &mut signal_carry,
            &mut signal_rng,
        )
        .map_err(photonics_err)?;
        signal.timestamps_ps.extend(clicks);
        signal_tally.add(&tally);
        let (clicks, tally) = apply_channel_block(
            &pairs.idler.timestamps_ps,
            t0,
            t1,
            duration,
            &LossBudget::lossless(),
            &herald,
            &p.idler_detector,
            &mut idler_carry,
            &mut idler_rng,
        )
        .map_err(photonics_err)?;
        idler.timestamps_ps.extend(clicks);
        idler_tally.add(&tally);
    }
    seal(&mut signal.timestamps_ps, &mut signal_tally);
    seal(&mut idler.timestamps_ps, &mut idler_tally);
    Ok(Photons {
        signal,
        idler,
        signal_tally,
        idler_tally,
        extra_loss_fit,
        extra_loss: losses.extra_loss,
    })
}

/// Jitter can push a click past a block boundary, behind background clicks
/// of the next block; restore strict ordering after concatenation.
fn seal(ts: &mut Vec<u64>, tally: &mut ChannelTally) {
    if ts.windows(2).all(|w| w[0] < w[1]) {
        return;
    }
    ts.sort_unstable();
    let before = ts.len();
    ts.dedup();
    tally.merged_duplicates += (before - ts.len()) as u64;
    tally.clicks = ts.len() as u64;
}

fn assemble(cfg: &ScenarioConfig, corrected: LoopOutcome, uncorrected: LoopOutcome, ph: Photons) -> ArtifactSet {
    let hash = cfg.hash();
    let tag = |mut t: TraceLog| {
        t.config_hash = Some(hash.clone());
        t
    };
    ArtifactSet {
        config: cfg.clone(),
        stats: RunStats {
            config_hash: hash.clone(),
            signal_tally: ph.signal_tally,
            idler_tally: ph.idler_tally,
            extra_loss_fit: ph.extra_loss_fit,
            extra_loss: ph.extra_loss,
            bridge: corrected.bridge,
            coarse_warnings: corrected.coarse_warnings,
            pid_faults: corrected.pid_faults,
            beam_lost_steps: corrected.beam_lost_steps,
        },
        coarse_events: corrected.coarse_events,
        corrected: tag(corrected.trace),
        uncorrected: tag(uncorrected.trace),
        signal: ph.signal,
        idler: ph.idler,
    }
}

/// Runs every stage in memory without touching the filesystem.
pub fn simulate(cfg: &ScenarioConfig) -> Result<ArtifactSet, HarnessError> {
    cfg.validate()?;
    let corrected = corrected_loop(cfg)?;
    let uncorrected = uncorrected_loop(cfg)?;
    let ph = photons(cfg, &corrected.trace)?;
    Ok(assemble(cfg, corrected, uncorrected, ph))
}

/// Runs the scenario and writes its artifacts to `out_dir` (or the
/// directory chosen by [`ScenarioConfig::resolve_output_dir`]).
///
/// Artifacts are written as each stage finishes; on error a `FAILED` file
/// holding the message is left next to whatever was written.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<(RunReport, PathBuf), HarnessError> {
    cfg.validate()?;
    // surface a bad profile before anything is written
    cfg.temp_profile()?;
    let started = Instant::now();
    let dir = cfg.resolve_output_dir(out_dir);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let _ = fs::remove_file(dir.join(FAILED_MARKER));
    match run_stages(cfg, &dir, started) {
        Ok(report) => Ok((report, dir)),
        Err(e) => {
            let _ = fs::write(dir.join(FAILED_MARKER), format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_stages(cfg: &ScenarioConfig, dir: &Path, started: Instant) -> Result<RunReport, HarnessError> {
    let hash = cfg.hash();
    write_text(&dir.join(files::CONFIG), &cfg.to_toml_string())?;

    let mut corrected = corrected_loop(cfg)?;
    corrected.trace.config_hash = Some(hash.clone());
    write_trace(&dir.join(files::TRACE_CORRECTED), &corrected.trace)?;
    let mut uncorrected = uncorrected_loop(cfg)?;
    uncorrected.trace.config_hash = Some(hash.clone());
    write_trace(&dir.join(files::TRACE_UNCORRECTED), &uncorrected.trace)?;

    let ph = photons(cfg, &corrected.trace)?;
    write_stream(&dir.join(files::SIGNAL), &ph.signal)?;
    write_stream(&dir.join(files::IDLER), &ph.idler)?;

    let set = assemble(cfg, corrected, uncorrected, ph);
    write_coarse(&dir.join(files::COARSE_EVENTS), &set.coarse_events, &hash)?;
    write_json(&dir.join(files::RUN_STATS), &set.stats)?;

    let (report, hist) = analyze(&set, 0.0)?;
    let path = dir.join(files::HISTOGRAM);
    let mut text = format!("# config_hash={hash}\n");
    text.push_str(&hist.to_csv_string());
    write_text(&path, &text)?;
    let report = RunReport {
        wall_clock_s: started.elapsed().as_secs_f64(),
        ..report
    };
    write_report(dir, &report)?;
    Ok(report)
}

/// Result of sweeping the coupling scale `eta0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eta0Calibration {
    /// `(eta0, mean η)` for each grid point.
    pub grid: Vec<(f64, f64)>,
    pub eta0: f64,
    pub mean_eta: f64,
}

/// Runs the corrected loop once per grid value of `plant.coupling.eta0` and
/// picks the value whose time-averaged η is closest to `target_mean_eta`.
pub fn calibrate_eta0(cfg: &ScenarioConfig, grid: &[f64], target_mean_eta: f64) -> Result<Eta0Calibration, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Invalid {
            module: "plant",
            message: "eta0 grid is empty".into(),
        });
    }
    let mut points = Vec::with_capacity(grid.len());
    for &eta0 in grid {
        let mut c = cfg.clone();
        c.plant.coupling.eta0 = eta0;
        c.validate()?;
        let out = corrected_loop(&c)?;
        let etas: Vec<f64> = out.trace.rows.iter().map(|r| r.eta).collect();
        points.push((eta0, mean(&etas)));
    }
    let &(eta0, mean_eta) = points
        .iter()
        .min_by(|a, b| (a.1 - target_mean_eta).abs().total_cmp(&(b.1 - target_mean_eta).abs()))
        .expect("non-empty grid");
    Ok(Eta0Calibration {
        grid: points,
        eta0,
        mean_eta,
    })
}
