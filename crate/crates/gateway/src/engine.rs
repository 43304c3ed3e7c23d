//! The session state machine. A single thread owns it; client commands and
//! decoder ticks are applied one at a time.

use std::path::Path;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use emg_core::bundle::{recalibrate, train_bundle, BundleConfig, ModelBundle};
use emg_core::decoder::{DecoderConfig, DecoderOutput, RealtimeDecoder};
use emg_core::ingest::{label_windows, rms_dataset, Cue, CueSchedule, Recording};
use emg_core::pipeline::{reject_channels, ChannelMask, Preprocessor, DEFAULT_IMPEDANCE_THRESHOLD_OHMS, DEFAULT_WINDOW_LEN};
use emg_core::Gesture;
use emg_robot::{RobotConfig, RobotState};
use serde::{Deserialize, Serialize};

use crate::hub::{ClientId, Hub};
use crate::protocol::{
    parse_client_command, ClientCommand, CuePhase, ErrorCode, EventBody, EventMessage, Phase, SessionState,
    SourceDescriptor,
};
use crate::robot_link::RobotLink;
use crate::source::{Fetch, LiveSource};

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    pub decoder: DecoderConfig,
    /// Wall-clock time between ticks. Sample pacing always follows
    /// `decoder.tick_rate_hz`; a shorter interval replays stored sources
    /// faster than real time.
    pub tick_interval: Duration,
    pub robot: RobotConfig,
    /// UDP address of an external simulator; `None` runs one in-process.
    pub sim_addr: Option<String>,
    pub bundle_config: BundleConfig,
    pub impedance_threshold_ohms: f64,
    /// How long a tick waits for streamed samples before skipping.
    pub stream_wait: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        let decoder = DecoderConfig::default();
        Self {
            tick_interval: Duration::from_secs_f64(1.0 / decoder.tick_rate_hz),
            decoder,
            robot: RobotConfig::default(),
            sim_addr: None,
            bundle_config: BundleConfig::default(),
            impedance_threshold_ohms: DEFAULT_IMPEDANCE_THRESHOLD_OHMS,
            stream_wait: Duration::from_millis(50),
        }
    }
}

/// What `GET /state` returns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub session: SessionState,
    pub robot: Option<RobotState>,
    pub last_prediction: Option<EventMessage>,
}

pub enum EngineMsg {
    Connected(ClientId),
    Disconnected(ClientId),
    Command { client: ClientId, text: String },
    Shutdown,
}

type CommandError = (ErrorCode, String);

struct CueRun {
    schedule: CueSchedule,
    start_sample: u64,
    recorded_to: u64,
    ticks: u64,
    channels: Vec<Vec<f32>>,
    train: Option<TrainRequest>,
}

#[derive(Clone)]
struct TrainRequest {
    epochs: Option<usize>,
    save_to: Option<String>,
}

struct TrainingJob {
    handle: JoinHandle<Result<ModelBundle, String>>,
    save_to: Option<String>,
}

pub struct Engine {
    config: GatewayConfig,
    hub: Arc<Hub>,
    snapshot: Arc<RwLock<StateSnapshot>>,
    phase: Phase,
    bundle: Option<(String, Arc<ModelBundle>)>,
    source_desc: SourceDescriptor,
    source: LiveSource,
    decoder: RealtimeDecoder,
    robot: RobotLink,
    tick: u64,
    /// Window end of pacing step k is `anchor + round(k·rate/tick_rate)`.
    anchor: u64,
    k: u64,
    inject: Option<Gesture>,
    cues: Option<CueRun>,
    training: Option<TrainingJob>,
    last_prediction: Option<EventMessage>,
}

impl Engine {
    pub fn new(config: GatewayConfig, hub: Arc<Hub>) -> Result<Self, String> {
        let decoder = RealtimeDecoder::new(config.decoder.clone()).map_err(|e| e.to_string())?;
        config.robot.validate().map_err(|e| e.to_string())?;
        let robot = match &config.sim_addr {
            Some(addr) => RobotLink::remote(addr, config.robot.clone()).map_err(|e| e.to_string())?,
            None => RobotLink::local(config.robot.clone()),
        };
        let mut engine = Self {
            config,
            hub,
            snapshot: Arc::new(RwLock::new(StateSnapshot::default())),
            phase: Phase::Idle,
            bundle: None,
            source_desc: SourceDescriptor::None,
            source: LiveSource::None,
            decoder,
            robot,
            tick: 0,
            anchor: DEFAULT_WINDOW_LEN as u64,
            k: 0,
            inject: None,
            cues: None,
            training: None,
            last_prediction: None,
        };
        engine.update_snapshot();
        Ok(engine)
    }

    pub fn snapshot_handle(&self) -> Arc<RwLock<StateSnapshot>> {
        self.snapshot.clone()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn session(&self) -> SessionState {
        SessionState {
            phase: self.phase,
            bundle: self.bundle.as_ref().map(|(id, _)| id.clone()),
            source: self.source_desc.clone(),
            tick: self.tick,
            clients: self.hub.client_count(),
            mode: self.decoder.mode(),
        }
    }

    fn window_len(&self) -> usize {
        self.bundle
            .as_ref()
            .map_or(DEFAULT_WINDOW_LEN, |(_, b)| b.pipeline.pre.window_len)
    }

    fn offset(&self, k: u64) -> u64 {
        let rate = self.source.sample_rate_hz().unwrap_or(0.0);
        (k as f64 * rate / self.config.decoder.tick_rate_hz).round() as u64
    }

    fn current_end(&self) -> u64 {
        self.anchor + self.offset(self.k)
    }

    fn broadcast(&self, body: EventBody) -> u64 {
        self.hub.broadcast(self.tick, body)
    }

    fn broadcast_session(&mut self) {
        self.broadcast(EventBody::Session(self.session()));
        self.update_snapshot();
    }

    fn update_snapshot(&mut self) {
        let snap = StateSnapshot {
            session: self.session(),
            robot: self.robot.state(),
            last_prediction: self.last_prediction.clone(),
        };
        *self.snapshot.write().unwrap() = snap;
    }

    fn report(&self, client: Option<ClientId>, code: ErrorCode, message: String) {
        tracing::warn!(?code, %message, "session error");
        let body = EventBody::error(code, message);
        match client {
            Some(id) => self.hub.send_to(id, self.tick, body),
            None => self.broadcast(body),
        };
    }

    /// Entry point for wire commands; errors go back to `client` as events.
    pub fn handle_text(&mut self, client: ClientId, text: &str) {
        let result = parse_client_command(text).and_then(|cmd| self.handle_command(cmd));
        if let Err((code, message)) = result {
            self.report(Some(client), code, message);
        }
    }

    pub fn handle_command(&mut self, cmd: ClientCommand) -> Result<(), CommandError> {
        let illegal = |phase: Phase, what: &str| {
            Err((ErrorCode::IllegalTransition, format!("{what} not allowed while {phase:?}")))
        };
        match cmd {
            ClientCommand::StartSession => {
                if self.phase != Phase::Idle {
                    return illegal(self.phase, "start_session");
                }
                if self.bundle.is_none() {
                    return Err((ErrorCode::IllegalTransition, "decoding requires a loaded bundle".into()));
                }
                self.start_decoding();
            }
            ClientCommand::LoadBundle { path } => {
                if !matches!(self.phase, Phase::Idle | Phase::Decoding) {
                    return illegal(self.phase, "load_bundle");
                }
                if !Path::new(&path).is_file() {
                    return Err((ErrorCode::BundleNotFound, format!("bundle not found: {path}")));
                }
                let bundle = ModelBundle::load(&path).map_err(|e| (ErrorCode::BundleInvalid, format!("{path}: {e}")))?;
                self.install_bundle(path, bundle);
            }
            ClientCommand::StartCues {
                preset,
                seed,
                train,
                epochs,
                save_to,
            } => {
                if self.phase != Phase::Idle {
                    return illegal(self.phase, "start_cues");
                }
                if train && matches!(self.source, LiveSource::None) {
                    return Err((ErrorCode::BadRequest, "training needs an EMG source".into()));
                }
                let own = self.source.schedule().cloned();
                let (schedule, start) = match own {
                    Some(s) => (s, 0),
                    None => {
                        let s = CueSchedule::preset(preset, seed).map_err(|e| (ErrorCode::BadRequest, e.to_string()))?;
                        let start = match &self.source {
                            LiveSource::Stream(_) => self.source.live_edge(),
                            _ => self.current_end(),
                        };
                        (s, start)
                    }
                };
                self.anchor = start;
                self.k = 1;
                let channels = self.source.channel_count().unwrap_or(0);
                self.cues = Some(CueRun {
                    schedule,
                    start_sample: start,
                    recorded_to: start,
                    ticks: 0,
                    channels: vec![Vec::new(); channels],
                    train: train.then_some(TrainRequest { epochs, save_to }),
                });
                self.phase = Phase::Calibrating;
                self.broadcast_session();
            }
            ClientCommand::InjectGesture { gesture } => {
                if self.phase != Phase::Decoding {
                    return illegal(self.phase, "inject_gesture");
                }
                self.inject = Some(gesture);
            }
            ClientCommand::SetSource { source } => {
                if self.phase != Phase::Idle {
                    return illegal(self.phase, "set_source");
                }
                let live = LiveSource::open(&source).map_err(|e| (ErrorCode::SourceError, e))?;
                self.source = live;
                self.source_desc = source;
                self.anchor = self.window_len() as u64;
                self.k = 0;
                self.broadcast_session();
            }
            ClientCommand::Stop => self.to_idle(),
        }
        Ok(())
    }

    fn install_bundle(&mut self, id: String, bundle: ModelBundle) {
        self.bundle = Some((id, Arc::new(bundle)));
        self.decoder = RealtimeDecoder::new(self.config.decoder.clone()).expect("validated at startup");
        self.broadcast_session();
    }

    fn start_decoding(&mut self) {
        let n = self.window_len() as u64;
        self.anchor = match &self.source {
            LiveSource::Stream(_) => self.source.live_edge().max(n),
            _ => self.current_end().max(n),
        };
        self.k = 0;
        self.inject = None;
        self.phase = Phase::Decoding;
        self.broadcast_session();
    }

    fn to_idle(&mut self) {
        if self.phase == Phase::Decoding {
            if let Err(e) = self.robot.halt(self.tick, self.decoder.mode()) {
                self.report(None, ErrorCode::RobotLink, e);
            }
        }
        self.cues = None;
        self.training = None;
        self.inject = None;
        self.phase = Phase::Idle;
        self.broadcast_session();
    }

    /// One tick of whatever the current phase does.
    pub fn tick(&mut self) {
        let dropped = self.hub.take_dropped();
        if !dropped.is_empty() {
            tracing::info!(?dropped, "clients disconnected for overflow");
            self.broadcast_session();
        }
        match self.phase {
            Phase::Idle => {}
            Phase::Calibrating => self.calibration_tick(),
            Phase::Training => self.poll_training(),
            Phase::Decoding => self.decode_tick(),
        }
    }

    fn fetch(&mut self, end: u64, n: usize) -> Option<emg_core::pipeline::SampleWindow> {
        match self.source.window_ending_at(end, n, self.config.stream_wait) {
            Ok(Fetch::Ready(w)) => Some(w),
            Ok(Fetch::Pending) => None,
            Ok(Fetch::Ended) => {
                self.report(None, ErrorCode::SourceEnded, "source has no more samples".into());
                self.to_idle();
                None
            }
            Err(e) => {
                self.report(None, ErrorCode::SourceError, e);
                if let LiveSource::Stream(_) = self.source {
                    // Fell behind the stream buffer: rejoin at the live edge.
                    self.anchor = self.source.live_edge().max(self.window_len() as u64);
                    self.k = 0;
                }
                None
            }
        }
    }

    fn decode_tick(&mut self) {
        let Some((_, bundle)) = self.bundle.clone() else {
            self.to_idle();
            return;
        };
        let result = if let Some(g) = self.inject.take() {
            self.k += 1;
            self.decoder.inject(g)
        } else if matches!(self.source, LiveSource::None) {
            self.decoder.idle_tick()
        } else {
            let end = self.current_end();
            let Some(window) = self.fetch(end, self.window_len()) else {
                return;
            };
            self.k += 1;
            self.decoder.decode_step(&bundle, &window)
        };
        match result {
            Ok(out) => self.publish_tick(out),
            Err(e) => {
                self.report(None, ErrorCode::SourceError, format!("decoding failed: {e}"));
                self.to_idle();
            }
        }
    }

    fn publish_tick(&mut self, out: DecoderOutput) {
        let previous_mode = if out.mode_changed { out.mode.toggled() } else { out.mode };
        let commands = match self.robot.step(&out) {
            Ok(c) => c,
            Err(e) => {
                self.report(None, ErrorCode::RobotLink, e);
                Vec::new()
            }
        };
        let prediction = EventBody::Prediction {
            gesture: out.gesture,
            raw: out.raw,
            consecutive_count: out.consecutive_count,
            injected: out.injected,
            mode: out.mode,
            commands,
        };
        let seq = self.broadcast(prediction.clone());
        self.last_prediction = Some(EventMessage {
            seq,
            tick: self.tick,
            body: prediction,
        });
        self.broadcast(EventBody::Confidence {
            probabilities: out.probabilities,
            confidence: out.confidence,
        });
        if out.mode_changed {
            self.broadcast(EventBody::Mode {
                mode: out.mode,
                previous: previous_mode,
            });
        }
        if let Some(state) = self.robot.state() {
            self.hub.publish_state(self.tick, EventBody::RobotState(state));
        }
        self.tick += 1;
        self.update_snapshot();
    }

    fn calibration_tick(&mut self) {
        let rate = self.source.sample_rate_hz();
        let tick_rate = self.config.decoder.tick_rate_hz;
        let end = self.current_end();
        let Some(run) = self.cues.as_ref() else {
            self.to_idle();
            return;
        };
        let (from, start) = (run.recorded_to, run.start_sample);
        let t = match rate {
            Some(rate) => {
                if end > from {
                    let Some(w) = self.fetch(end, (end - from) as usize) else {
                        return;
                    };
                    let run = self.cues.as_mut().expect("checked above");
                    for (c, dst) in run.channels.iter_mut().enumerate() {
                        dst.extend(w.channel(c).iter().map(|&x| x as f32));
                    }
                    run.recorded_to = end;
                }
                self.k += 1;
                (end - start) as f64 / rate
            }
            None => self.cues.as_ref().expect("checked above").ticks as f64 / tick_rate,
        };
        let run = self.cues.as_mut().expect("checked above");
        run.ticks += 1;
        if t >= run.schedule.duration_s() {
            self.finish_cues();
            return;
        }
        let body = cue_event(&run.schedule, t);
        self.broadcast(body);
        self.tick += 1;
        self.update_snapshot();
    }

    fn finish_cues(&mut self) {
        let Some(run) = self.cues.take() else {
            return;
        };
        let Some(request) = run.train.clone() else {
            self.to_idle();
            return;
        };
        let rate = self.source.sample_rate_hz().expect("training requires a source");
        let channels = run.channels.len();
        let mut samples = Vec::with_capacity(channels * run.channels.first().map_or(0, Vec::len));
        for c in run.channels {
            samples.extend(c);
        }
        let mut recording = match Recording::new(rate, channels, samples) {
            Ok(r) => r,
            Err(e) => {
                self.report(None, ErrorCode::TrainingFailed, e.to_string());
                self.to_idle();
                return;
            }
        };
        recording.impedances = self.source.impedances();
        let mut config = self.config.bundle_config.clone();
        if let Some(epochs) = request.epochs {
            config.train.epochs = epochs;
        }
        let previous = self.bundle.as_ref().map(|(_, b)| b.clone());
        let threshold = self.config.impedance_threshold_ohms;
        let schedule = run.schedule;
        let handle = std::thread::spawn(move || {
            train_from_recording(&recording, &schedule, previous.as_deref(), &config, threshold)
        });
        self.training = Some(TrainingJob {
            handle,
            save_to: request.save_to,
        });
        self.phase = Phase::Training;
        self.broadcast_session();
    }

    fn poll_training(&mut self) {
        let finished = self.training.as_ref().is_some_and(|j| j.handle.is_finished());
        if !finished {
            return;
        }
        let job = self.training.take().expect("checked above");
        let result = job.handle.join().unwrap_or_else(|_| Err("training thread panicked".into()));
        match result {
            Ok(bundle) => {
                if let Some(path) = &job.save_to {
                    if let Err(e) = bundle.save(path) {
                        self.report(None, ErrorCode::TrainingFailed, format!("saving {path}: {e}"));
                    }
                }
                let id = job.save_to.unwrap_or_else(|| format!("trained:{}", self.tick));
                self.bundle = Some((id, Arc::new(bundle)));
                self.decoder = RealtimeDecoder::new(self.config.decoder.clone()).expect("validated at startup");
                self.start_decoding();
            }
            Err(e) => {
                self.report(None, ErrorCode::TrainingFailed, e);
                self.to_idle();
            }
        }
    }

    /// Runs until `Shutdown` arrives or every sender is gone.
    pub fn run(mut self, rx: Receiver<EngineMsg>) {
        let interval = self.config.tick_interval;
        let mut next = Instant::now() + interval;
        loop {
            let wait = next.saturating_duration_since(Instant::now());
            match rx.recv_timeout(wait) {
                Ok(EngineMsg::Connected(id)) => {
                    self.hub.send_to(id, self.tick, EventBody::Session(self.session()));
                    self.broadcast_session();
                }
                Ok(EngineMsg::Disconnected(id)) => {
                    self.hub.unsubscribe(id);
                    self.broadcast_session();
                }
                Ok(EngineMsg::Command { client, text }) => self.handle_text(client, &text),
                Ok(EngineMsg::Shutdown) | Err(RecvTimeoutError::Disconnected) => break,
                Err(RecvTimeoutError::Timeout) => {
                    self.tick();
                    next += interval;
                    let now = Instant::now();
                    if next < now {
                        next = now + interval;
                    }
                }
            }
        }
        if self.phase == Phase::Decoding {
            let _ = self.robot.halt(self.tick, self.decoder.mode());
        }
    }
}

/// Labels the cue run, fits the preprocessing and trains a bundle. With a
/// previous bundle its channel mask and filter are kept.
pub fn train_from_recording(
    recording: &Recording,
    schedule: &CueSchedule,
    previous: Option<&ModelBundle>,
    config: &BundleConfig,
    impedance_threshold_ohms: f64,
) -> Result<ModelBundle, String> {
    use emg_core::ingest::SampleSource;
    let s = |e: emg_core::Error| e.to_string();
    let pre = match previous {
        Some(b) => b.pipeline.pre.clone(),
        None => {
            let mask = match recording.impedances() {
                Some(z) => reject_channels(z, impedance_threshold_ohms).map_err(s)?,
                None => ChannelMask::all(recording.channel_count),
            };
            Preprocessor::standard(mask, recording.sample_rate_hz).map_err(s)?
        }
    };
    let labeled = label_windows(recording.len(), recording.sample_rate_hz, schedule, pre.window_len, "session").map_err(s)?;
    let (rms, labels) = rms_dataset(&pre, recording, &labeled).map_err(s)?;
    match previous {
        Some(b) => recalibrate(b, &rms, &labels, config).map_err(s),
        None => train_bundle(pre, &rms, &labels, config).map_err(s),
    }
}

/// Cue event for time `t` seconds into the run.
fn cue_event(schedule: &CueSchedule, t: f64) -> EventBody {
    let count = schedule.len();
    let labeled_from = |c: &Cue| c.label_start_s(&schedule.timing);
    match schedule.cue_at(t) {
        Some(c) => {
            let (phase, until) = if t < c.transition_start_s {
                (CuePhase::Rest, c.transition_start_s)
            } else if t < c.hold_start_s {
                (CuePhase::Transition, c.hold_start_s)
            } else if t < c.hold_end_s {
                (CuePhase::Hold, c.hold_end_s)
            } else {
                (CuePhase::Return, c.end_s)
            };
            EventBody::Cue {
                index: c.index,
                count,
                gesture: c.gesture,
                phase,
                time_s: t,
                phase_remaining_s: (until - t).max(0.0),
                labeled: phase == CuePhase::Hold && t >= labeled_from(c),
            }
        }
        None => {
            let next = schedule.cues.iter().find(|c| c.start_s > t);
            EventBody::Cue {
                index: next.map_or(count, |c| c.index),
                count,
                gesture: next.map_or(Gesture::Rest, |c| c.gesture),
                phase: CuePhase::Pause,
                time_s: t,
                phase_remaining_s: next.map_or(0.0, |c| c.start_s - t),
                labeled: false,
            }
        }
    }
}
