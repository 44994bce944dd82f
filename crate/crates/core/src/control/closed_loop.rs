use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    pid_update, CoarseAligner, CoarseConfig, CoarseDecision, ControlError, PidConfig, PidState,
    TraceLog, TraceRow,
};
use crate::netlink::{Bridge, BridgeEvent, BridgeStats, Channel};
use crate::plant::{
    beam_centroids, coupling_efficiency, fsm_step, hexapod_step, psd_position, psd_voltages,
    CouplingModel, FsmParams, FsmState, HexapodParams, HexapodState, OpticsGeometry, PsdModel,
    SpotPosition,
};
use crate::rng::{stream_rng, Stream};
use crate::turbulence::{
    drift_at, gauss_markov_step, sample_scintillation, sample_wander, DriftParams,
    ScintillationParams, ScintillationState, TempProfile, WanderParams,
};
use crate::vec2::Vec2;

/// Device and geometry parameters of the optical plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub geometry: OpticsGeometry,
    pub psd: PsdModel,
    pub fsm: FsmParams,
    pub hexapod: HexapodParams,
    pub coupling: CouplingModel,
    /// Mean tracking-beam power reaching the sensor, mW.
    pub tracking_power_mw: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            geometry: OpticsGeometry::default(),
            psd: PsdModel::default(),
            fsm: FsmParams::default(),
            hexapod: HexapodParams::default(),
            coupling: CouplingModel::default(),
            tracking_power_mw: 1.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        self.geometry.validate()?;
        self.psd.validate()?;
        self.fsm.validate()?;
        self.hexapod.validate()?;
        self.coupling.validate()?;
        if !(self.tracking_power_mw.is_finite() && self.tracking_power_mw > 0.0) {
            return Err(ControlError::InvalidConfig("tracking power must be > 0".into()));
        }
        Ok(())
    }
}

/// Atmospheric and thermal inputs to the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbances {
    pub wander: WanderParams,
    pub drift: DriftParams,
    pub profile: TempProfile,
    /// Profile time corresponding to `t = 0` of the run, s.
    pub profile_start_s: f64,
    pub scintillation: ScintillationParams,
}

impl Default for Disturbances {
    fn default() -> Self {
        Self {
            wander: WanderParams::default(),
            drift: DriftParams::default(),
            profile: TempProfile::constant(DriftParams::default().reference_temp_c),
            profile_start_s: 0.0,
            scintillation: ScintillationParams::default(),
        }
    }
}

impl Disturbances {
    /// No wander, drift, or scintillation.
    pub fn quiet() -> Self {
        Self {
            wander: WanderParams {
                sigma_x_um: 0.0,
                sigma_y_um: 0.0,
                ..WanderParams::default()
            },
            drift: DriftParams {
                gain_um_per_c: Vec2::ZERO,
                ..DriftParams::default()
            },
            scintillation: ScintillationParams {
                log_sigma: 0.0,
                ..ScintillationParams::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        self.wander.validate()?;
        self.drift.validate()?;
        self.scintillation.validate()?;
        if !self.profile_start_s.is_finite() {
            return Err(ControlError::InvalidConfig("profile start must be finite".into()));
        }
        Ok(())
    }
}

/// Stepping and feedback switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    /// Plant integration rate, Hz.
    pub sim_rate_hz: f64,
    pub fine_enabled: bool,
    pub coarse_enabled: bool,
    /// Reflector tilt at `t = 0`, μrad.
    pub initial_hexapod_urad: Vec2,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            sim_rate_hz: 1000.0,
            fine_enabled: true,
            coarse_enabled: true,
            initial_hexapod_urad: Vec2::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSetup {
    pub plant: PlantConfig,
    pub disturbances: Disturbances,
    pub pid: PidConfig,
    pub coarse: CoarseConfig,
    pub sim: LoopConfig,
}

impl Default for LoopSetup {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            disturbances: Disturbances::default(),
            pid: PidConfig::default(),
            coarse: CoarseConfig::default(),
            sim: LoopConfig::default(),
        }
    }
}

impl LoopSetup {
    /// Plant steps per controller update.
    pub fn steps_per_update(&self) -> Result<usize, ControlError> {
        let ratio = self.sim.sim_rate_hz / self.pid.rate_hz;
        let n = ratio.round();
        if !(n >= 1.0 && (ratio - n).abs() < 1e-9 * ratio) {
            return Err(ControlError::InvalidConfig(format!(
                "sim rate {} Hz must be an integer multiple of the pid rate {} Hz",
                self.sim.sim_rate_hz, self.pid.rate_hz
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        self.plant.validate()?;
        self.disturbances.validate()?;
        self.pid.validate()?;
        self.coarse.validate()?;
        if !(self.sim.sim_rate_hz.is_finite() && self.sim.sim_rate_hz > 0.0) {
            return Err(ControlError::InvalidConfig("sim rate must be > 0".into()));
        }
        if !self.sim.initial_hexapod_urad.is_finite() {
            return Err(ControlError::InvalidConfig("initial reflector tilt must be finite".into()));
        }
        self.steps_per_update()?;
        Ok(())
    }
}

/// How coarse moves reach the reflector.
pub enum HexapodLink {
    /// Moves are applied the moment they are issued.
    Direct,
    /// Moves travel over the simulated wireless bridge.
    Bridge(Bridge<Box<dyn Channel + Send>>),
}

impl std::fmt::Debug for HexapodLink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HexapodLink::Direct => f.write_str("Direct"),
            HexapodLink::Bridge(b) => write!(f, "Bridge({:?})", b.stats()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoarseStatus {
    /// Issued, outcome not yet known when the run ended.
    Pending,
    Applied,
    Failed,
    /// Skipped because the previous request was still outstanding.
    Busy,
}

impl CoarseStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoarseStatus::Pending => "pending",
            CoarseStatus::Applied => "applied",
            CoarseStatus::Failed => "failed",
            CoarseStatus::Busy => "busy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pending" => CoarseStatus::Pending,
            "applied" => CoarseStatus::Applied,
            "failed" => CoarseStatus::Failed,
            "busy" => CoarseStatus::Busy,
            _ => return None,
        })
    }
}

/// One coarse move the aligner decided on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseEvent {
    pub time_s: f64,
    /// Averaged offset that triggered the move, μm.
    pub mean: Vec2,
    /// Requested tilt change, μrad.
    pub delta: Vec2,
    pub status: CoarseStatus,
    pub attempts: u32,
    /// When the reflector applied the move.
    pub applied_at_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub trace: TraceLog,
    pub coarse_events: Vec<CoarseEvent>,
    pub bridge: Option<BridgeStats>,
    pub coarse_warnings: u64,
    pub pid_faults: u64,
    pub beam_lost_steps: u64,
}

struct Coarse<'a> {
    link: &'a mut HexapodLink,
    events: Vec<CoarseEvent>,
    by_seq: HashMap<u64, usize>,
}

impl Coarse<'_> {
    fn issue(
        &mut self,
        t: f64,
        mean: Vec2,
        delta: Vec2,
        hex: &mut HexapodState,
        params: &HexapodParams,
    ) -> Result<(), ControlError> {
        let mut event = CoarseEvent {
            time_s: t,
            mean,
            delta,
            status: CoarseStatus::Pending,
            attempts: 0,
            applied_at_s: None,
        };
        match self.link {
            HexapodLink::Direct => {
                hex.apply_move(delta, params)?;
                event.status = CoarseStatus::Applied;
                event.attempts = 1;
                event.applied_at_s = Some(t);
                self.events.push(event);
            }
            HexapodLink::Bridge(bridge) => {
                if bridge.is_busy() {
                    event.status = CoarseStatus::Busy;
                    self.events.push(event);
                    return Ok(());
                }
                let seq = bridge.request_move(delta, t)?;
                self.by_seq.insert(seq, self.events.len());
                self.events.push(event);
                self.deliver(t, hex, params)?;
            }
        }
        Ok(())
    }

    fn deliver(
        &mut self,
        t: f64,
        hex: &mut HexapodState,
        params: &HexapodParams,
    ) -> Result<(), ControlError> {
        let HexapodLink::Bridge(bridge) = self.link else {
            return Ok(());
        };
        for ev in bridge.advance(t) {
            match ev {
                BridgeEvent::Applied { seq, delta, at } => {
                    hex.apply_move(delta, params)?;
                    if let Some(&i) = self.by_seq.get(&seq) {
                        self.events[i].applied_at_s = Some(at);
                    }
                }
                BridgeEvent::Completed { seq, attempts, .. } => {
                    if let Some(&i) = self.by_seq.get(&seq) {
                        self.events[i].status = CoarseStatus::Applied;
                        self.events[i].attempts = attempts;
                    }
                }
                BridgeEvent::Failed { seq, attempts, .. } => {
                    if let Some(&i) = self.by_seq.get(&seq) {
                        self.events[i].status = CoarseStatus::Failed;
                        self.events[i].attempts = attempts;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn ou_step<R: Rng>(state: Vec2, dt: f64, sigma: f64, bandwidth_hz: f64, rng: &mut R) -> Vec2 {
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    Vec2::new(
        gauss_markov_step(state.x, dt, sigma, bandwidth_hz, zx),
        gauss_markov_step(state.y, dt, sigma, bandwidth_hz, zy),
    )
}

/// Co-simulates plant, disturbances, and both correction tiers for
/// `duration_s` seconds.
///
/// The plant advances at `sim_rate_hz`; the PID fires every
/// `sim_rate_hz / rate_hz` steps; the coarse aligner is evaluated at every
/// multiple of its cadence. Random draws do not depend on the feedback
/// switches, so corrected and uncorrected runs with one seed see the same
/// atmosphere.
pub fn run_closed_loop(
    setup: &LoopSetup,
    duration_s: f64,
    seed: u64,
    link: &mut HexapodLink,
) -> Result<LoopOutcome, ControlError> {
    setup.validate()?;
    if !(duration_s.is_finite() && duration_s >= 0.0) {
        return Err(ControlError::InvalidConfig(format!("duration must be ≥ 0, got {duration_s}")));
    }
    let plant = &setup.plant;
    let dist = &setup.disturbances;
    let geometry = &plant.geometry;
    let rate = setup.sim.sim_rate_hz;
    let dt = 1.0 / rate;
    let per_update = setup.steps_per_update()?;
    let pid_dt = per_update as f64 * dt;
    let steps = (duration_s * rate).round() as usize;
    let fsm_lever = geometry.fsm_lever_um_per_urad();
    let signal_floor = 10.0 * plant.psd.noise_sigma_v;

    let mut wander_rng = stream_rng(seed, Stream::Wander);
    let mut scint_rng = stream_rng(seed, Stream::Scintillation);
    let mut chroma_rng = stream_rng(seed, Stream::Chromatic);
    let mut psd_rng = stream_rng(seed, Stream::PsdNoise);

    let mut wander = dist.wander.sample_stationary(&mut wander_rng);
    let mut scint = ScintillationState::stationary(&dist.scintillation, &mut scint_rng);
    let chroma_sigma = geometry.chromatic_jitter_um;
    let mut chroma = {
        let zx: f64 = chroma_rng.sample(StandardNormal);
        let zy: f64 = chroma_rng.sample(StandardNormal);
        Vec2::new(zx, zy) * chroma_sigma
    };

    let mut fsm = FsmState::default();
    let mut hex = HexapodState::at_rest(setup.sim.initial_hexapod_urad);
    let mut pid = PidState::default();
    let mut aligner = CoarseAligner::new(setup.coarse)?;
    let mut next_coarse = setup.coarse.cadence_s;
    let mut coarse = Coarse {
        link,
        events: Vec::new(),
        by_seq: HashMap::new(),
    };
    let mut rows = Vec::with_capacity(steps);
    let mut pid_faults = 0u64;
    let mut beam_lost_steps = 0u64;

    for k in 0..steps {
        let t = k as f64 / rate;
        coarse.deliver(t, &mut hex, &plant.hexapod)?;

        let drift = drift_at(dist.profile_start_s + t, &dist.profile, &dist.drift);
        let beams = beam_centroids(&fsm, &hex, wander, drift, chroma, geometry);
        let eta = coupling_efficiency(beams.quantum, &plant.coupling);
        let scint_factor = scint.factor(&dist.scintillation);
        let spot = SpotPosition {
            x: beams.tracking.x * 1e-3,
            y: beams.tracking.y * 1e-3,
        };
        let volts = psd_voltages(spot, plant.tracking_power_mw * scint_factor, &plant.psd, &mut psd_rng);
        let reading = psd_position(&volts, &plant.psd)
            .ok()
            .filter(|_| volts.sum() > signal_floor);
        let beam_lost = reading.is_none();
        if beam_lost {
            beam_lost_steps += 1;
        }

        if k % per_update == 0 {
            if let Some(pos) = reading {
                let pos = Vec2::new(pos.x, pos.y);
                if setup.sim.fine_enabled {
                    let (u, next) = pid_update(&pid, -pos, pid_dt, &setup.pid)?;
                    if next.fault {
                        pid_faults += 1;
                    }
                    pid = PidState { fault: false, ..next };
                    fsm.command(u)?;
                }
                aligner.record(t, pos * 1e3 - fsm.theta * fsm_lever)?;
            }
            // beam lost: hold the last FSM command
        }

        if setup.sim.coarse_enabled && t >= next_coarse - 1e-9 {
            next_coarse += setup.coarse.cadence_s;
            if let CoarseDecision::Move { mean, delta } = aligner.tick(t) {
                coarse.issue(t, mean, delta, &mut hex, &plant.hexapod)?;
            }
        }

        rows.push(TraceRow {
            time_s: t,
            tracking: beams.tracking,
            quantum: beams.quantum,
            fsm_cmd: fsm.commanded,
            hexapod: hex.theta,
            eta,
            psd: reading.map_or(Vec2::new(f64::NAN, f64::NAN), |p| Vec2::new(p.x, p.y)),
            scint: scint_factor,
            beam_lost,
        });

        wander = sample_wander(wander, dt, &dist.wander, &mut wander_rng)?;
        chroma = ou_step(chroma, dt, chroma_sigma, geometry.chromatic_bandwidth_hz, &mut chroma_rng);
        scint = sample_scintillation(scint, dt, &dist.scintillation, &mut scint_rng)?.0;
        fsm = fsm_step(&fsm, dt, &plant.fsm)?;
        hex = hexapod_step(&hex, dt, &plant.hexapod);
    }

    let bridge = match coarse.link {
        HexapodLink::Bridge(b) => Some(b.stats()),
        HexapodLink::Direct => None,
    };
    Ok(LoopOutcome {
        trace: TraceLog {
            config_hash: None,
            rows,
        },
        coarse_events: coarse.events,
        bridge,
        coarse_warnings: aligner.warnings(),
        pid_faults,
        beam_lost_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_setup() -> LoopSetup {
        LoopSetup {
            plant: PlantConfig {
                psd: PsdModel {
                    noise_sigma_v: 0.0,
                    ..PsdModel::default()
                },
                geometry: OpticsGeometry {
                    chromatic_jitter_um: 0.0,
                    ..OpticsGeometry::default()
                },
                ..PlantConfig::default()
            },
            disturbances: Disturbances::quiet(),
            ..LoopSetup::default()
        }
    }

    #[test]
    fn quiet_plant_stays_at_origin() {
        let out = run_closed_loop(&quiet_setup(), 0.5, 1, &mut HexapodLink::Direct).unwrap();
        assert_eq!(out.trace.len(), 500);
        assert!(out.trace.rows.iter().all(|r| r.tracking == Vec2::ZERO));
    }

    #[test]
    fn rejects_incommensurate_rates() {
        let mut s = quiet_setup();
        s.pid.rate_hz = 300.0;
        assert!(run_closed_loop(&s, 0.1, 1, &mut HexapodLink::Direct).is_err());
    }

    #[test]
    fn lost_beam_holds_command() {
        let mut s = quiet_setup();
        // 40 mm off a 14 mm sensor
        s.sim.initial_hexapod_urad = Vec2::new(160.0, 0.0);
        s.sim.coarse_enabled = false;
        let out = run_closed_loop(&s, 0.2, 1, &mut HexapodLink::Direct).unwrap();
        assert_eq!(out.beam_lost_steps, 200);
        assert!(out.trace.rows.iter().all(|r| r.fsm_cmd == Vec2::ZERO && r.beam_lost));
    }
}
