//! Live performance: control thread, audio thread, OSC and console.
//!
//! The control thread ticks at the control rate and owns the simulator (or
//! the OSC readings), the [`Conductor`] and the session recorder. It sends
//! `(tick, ParamFrame)` pairs to the audio thread over a bounded lock-free
//! queue. The audio thread owns the [`Renderer`] and renders each block at
//! `start + lag + sample / rate` on the wall clock, picking up ticks by the
//! same schedule an offline render uses. There is no audio device
//! dependency: blocks go to a null sink or to a WAV written at the end.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::Receiver;
use crossbeam_queue::ArrayQueue;

use super::bridge::{BridgeHandle, ConsoleBridge, ConsoleCommand, Telemetry, SCHEMA_VERSION, TELEMETRY_HZ};
use super::conductor::{scene_calibration, Conductor, Recorder};
use super::render::Renderer;
use super::scene::SceneConfig;
use super::session::{EventKind, SessionEvent, SessionLog, SessionMeta, SESSION_FORMAT};
use super::timeline::{Position, TimelineEvent};
use super::RuntimeError;
use crate::breath::{BreathControls, PressureFrame, Simulator, PILLOWS};
use crate::dsp::{encode_wav, MeterQueue, Meters};
use crate::mapping::{CalibrationMap, ParamFrame};
use crate::osc::{ControlEvent, Cue, GatewayConfig, OscGateway, Outbound, TransportCmd};

/// Silence on the pressure source longer than this marks the run degraded.
pub const STARVATION_S: f64 = 1.0;
const FRAME_QUEUE: usize = 1024;
const CHUNK_QUEUE: usize = 4096;
const MAX_BLOCK: usize = 256;
/// Blocks of buffering the null sink models; a block that finishes later
/// than this after its due time counts as an overrun.
const DEVICE_PERIODS: usize = 2;
/// The last stretch before a block is due is spent yielding, not sleeping.
const SPIN: Duration = Duration::from_millis(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LiveSource {
    /// The built-in simulator, steerable from the console.
    #[default]
    Sim,
    /// `/pillow/{n}/pressure` messages from a hardware rig.
    Osc,
}

#[derive(Debug, Clone)]
pub struct LiveOptions {
    pub seed: u64,
    pub source: LiveSource,
    pub osc: Option<GatewayConfig>,
    pub websocket: Option<SocketAddr>,
    /// Where to write each session log. Later sessions get `-2`, `-3`...
    pub session_dir: Option<PathBuf>,
    pub wav_out: Option<PathBuf>,
    /// Stop after this much wall-clock time.
    pub max_duration_s: Option<f64>,
    /// Start a session immediately instead of waiting for a start command.
    pub autostart: bool,
    /// Return once the timeline ends.
    pub exit_on_end: bool,
    /// Keep rendered audio in the report.
    pub keep_audio: bool,
    /// How far the audio clock trails the control clock.
    pub audio_lag_ms: f64,
}

impl LiveOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            source: LiveSource::Sim,
            osc: None,
            websocket: None,
            session_dir: None,
            wav_out: None,
            max_duration_s: None,
            autostart: true,
            exit_on_end: true,
            keep_audio: false,
            audio_lag_ms: 40.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub log: SessionLog,
    pub audio: Option<Vec<f32>>,
    /// Blocks that finished after the modelled device needed them.
    pub overruns: u64,
}

#[derive(Debug, Clone, Default)]
pub struct PerformReport {
    pub sessions: Vec<SessionRecord>,
    pub osc_dropped: u64,
}

/// A performance running in the background.
pub struct Performance {
    handle: Option<JoinHandle<Result<PerformReport, RuntimeError>>>,
    stop: Arc<AtomicBool>,
    websocket_addr: Option<SocketAddr>,
    osc_addr: Option<SocketAddr>,
}

impl Performance {
    pub fn websocket_addr(&self) -> Option<SocketAddr> {
        self.websocket_addr
    }

    pub fn osc_addr(&self) -> Option<SocketAddr> {
        self.osc_addr
    }

    /// Flag that ends the performance when set; safe to share with a signal
    /// handler.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    pub fn request_stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_finished(&self) -> bool {
        self.handle.as_ref().is_none_or(|h| h.is_finished())
    }

    pub fn wait(mut self) -> Result<PerformReport, RuntimeError> {
        match self.handle.take().expect("joined once").join() {
            Ok(r) => r,
            Err(_) => Err(RuntimeError::Session("control thread panicked".into())),
        }
    }
}

impl Drop for Performance {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Starts the OSC gateway and console bridge (when configured) and the
/// control thread.
pub fn perform(scene: &SceneConfig, opts: LiveOptions) -> Result<Performance, RuntimeError> {
    let calibration = scene_calibration(scene)?;
    let (osc_tx, osc_rx) = crossbeam_channel::unbounded();
    let gateway = match &opts.osc {
        Some(cfg) => Some(OscGateway::serve(cfg, osc_tx)?),
        None => None,
    };
    let (cmd_tx, cmd_rx) = crossbeam_channel::unbounded();
    let bridge = match opts.websocket {
        Some(addr) => Some(ConsoleBridge::serve(addr, cmd_tx)?),
        None => None,
    };
    let stop = Arc::new(AtomicBool::new(false));
    let websocket_addr = bridge.as_ref().map(BridgeHandle::local_addr);
    let osc_addr = gateway.as_ref().and_then(OscGateway::local_addr);

    let control = Control {
        scene: scene.clone(),
        calibration,
        opts,
        gateway,
        bridge,
        osc_rx,
        cmd_rx,
        stop: stop.clone(),
    };
    let handle = std::thread::Builder::new()
        .name("control".into())
        .spawn(move || control.run())
        .map_err(|e| RuntimeError::Session(e.to_string()))?;
    Ok(Performance { handle: Some(handle), stop, websocket_addr, osc_addr })
}

#[derive(Clone, Copy)]
struct Chunk {
    data: [f32; MAX_BLOCK],
    len: usize,
}

struct AudioShared {
    end_sample: AtomicU64,
    abort: AtomicBool,
}

struct AudioResult {
    overruns: u64,
    late_blocks: u64,
}

fn audio_loop(
    mut renderer: Renderer,
    frames: Arc<ArrayQueue<(u64, ParamFrame)>>,
    meters: MeterQueue,
    chunks: Option<Arc<ArrayQueue<Chunk>>>,
    shared: Arc<AudioShared>,
    mut start: Instant,
    block: usize,
) -> AudioResult {
    let sr = renderer.engine().config().sample_rate as f64;
    let deadline = Duration::from_secs_f64((DEVICE_PERIODS * block) as f64 / sr);
    let mut out = [0.0f32; MAX_BLOCK];
    let mut overruns = 0;
    loop {
        let pos = renderer.position();
        if pos >= shared.end_sample.load(Ordering::Acquire) || shared.abort.load(Ordering::Relaxed) {
            break;
        }
        let due = start + Duration::from_secs_f64(pos as f64 / sr);
        let now = Instant::now();
        if due > now + SPIN {
            std::thread::sleep(due - now - SPIN);
        }
        while Instant::now() < due {
            std::thread::yield_now();
        }
        let report = renderer.render_block(|| frames.pop(), &mut out[..block]);
        let done = Instant::now();
        if done > due + deadline {
            // Like a device xrun: one glitch, then the stream resyncs.
            overruns += 1;
            start += done - due;
        }
        meters.push(report.meters);
        if let Some(q) = &chunks {
            q.force_push(Chunk { data: out, len: block });
        }
    }
    AudioResult { overruns, late_blocks: renderer.late_blocks() }
}

struct Session {
    index: usize,
    seed: u64,
    seq: u64,
    sim: Simulator,
    conductor: Conductor,
    recorder: Recorder,
    frames: Arc<ArrayQueue<(u64, ParamFrame)>>,
    meters: MeterQueue,
    chunks: Option<Arc<ArrayQueue<Chunk>>>,
    audio: Vec<f32>,
    shared: Arc<AudioShared>,
    thread: Option<JoinHandle<AudioResult>>,
    osc_values: [f64; PILLOWS],
    osc_fatigue: f64,
    last_rx: Instant,
    started: Instant,
    degraded: bool,
    end_t: Option<f64>,
    last_frame: PressureFrame,
    last_normalized: [f64; PILLOWS],
    last_meters: Meters,
    position: Position,
    t_in_section: f64,
    unsent_events: Vec<SessionEvent>,
}

struct Control {
    scene: SceneConfig,
    calibration: CalibrationMap,
    opts: LiveOptions,
    gateway: Option<OscGateway>,
    bridge: Option<BridgeHandle>,
    osc_rx: Receiver<ControlEvent>,
    cmd_rx: Receiver<ConsoleCommand>,
    stop: Arc<AtomicBool>,
}

impl Control {
    fn start_session(&self, index: usize, seed: u64, controls: BreathControls, crush: [Option<f64>; PILLOWS]) -> Result<Session, RuntimeError> {
        let mut sim = Simulator::new(&self.scene.sim, seed)?;
        sim.set_controls(controls)?;
        sim.set_crush_override(crush);
        let renderer = Renderer::new(&self.scene, seed)?;
        let frames = Arc::new(ArrayQueue::new(FRAME_QUEUE));
        let meters = MeterQueue::new(64);
        let chunks = (self.opts.keep_audio || self.opts.wav_out.is_some()).then(|| Arc::new(ArrayQueue::new(CHUNK_QUEUE)));
        // Setup above can take a while; both clocks start from here.
        let at = Instant::now();
        let shared = Arc::new(AudioShared { end_sample: AtomicU64::new(u64::MAX), abort: AtomicBool::new(false) });
        let thread = {
            let (frames, meters, chunks, shared) = (frames.clone(), meters.clone(), chunks.clone(), shared.clone());
            let start = at + Duration::from_secs_f64(self.opts.audio_lag_ms.max(0.0) / 1000.0);
            let block = self.scene.audio.block_size;
            std::thread::Builder::new()
                .name("audio".into())
                .spawn(move || audio_loop(renderer, frames, meters, chunks, shared, start, block))
                .map_err(|e| RuntimeError::Session(e.to_string()))?
        };
        let floor = self.calibration.ranges.map(|r| r.raw_min);
        log::info!("session {} started (seed {seed})", index + 1);
        Ok(Session {
            index,
            seed,
            seq: 0,
            sim,
            conductor: Conductor::new(&self.scene, self.calibration, false)?,
            recorder: Recorder::default(),
            frames,
            meters,
            chunks,
            audio: Vec::new(),
            shared,
            thread: Some(thread),
            osc_values: floor,
            osc_fatigue: 0.0,
            last_rx: at,
            started: at,
            degraded: false,
            end_t: None,
            last_frame: PressureFrame { t: 0.0, seq: 0, values: floor },
            last_normalized: [0.0; PILLOWS],
            last_meters: Meters::default(),
            position: Position::In(crate::mapping::SectionId::Connection),
            t_in_section: 0.0,
            unsent_events: Vec::new(),
        })
    }

    fn tick(&self, s: &mut Session, cues: &[Cue]) {
        let dt = self.scene.sim.dt();
        let t = s.seq as f64 * dt;
        let frame = match self.opts.source {
            LiveSource::Sim => PressureFrame { seq: s.seq, ..s.sim.tick() },
            LiveSource::Osc => {
                let silent = s.last_rx.elapsed().as_secs_f64();
                if silent > STARVATION_S && !s.degraded {
                    s.degraded = true;
                    let e = SessionEvent::status(EventKind::StatusDegraded, t, s.seq, format!("no pressure data for {silent:.1} s"));
                    log::warn!("pressure source starved; holding last frame");
                    s.recorder.events.push(e.clone());
                    s.unsent_events.push(e);
                }
                PressureFrame { t, seq: s.seq, values: s.osc_values }
            }
        };
        let out = s.conductor.tick(&frame, s.seq, cues);
        s.frames.force_push((s.seq, out.params));
        s.recorder.record(s.seq, &frame, &out);
        s.unsent_events.extend(out.events.iter().map(|e| SessionEvent::from_timeline(e, s.seq)));
        for e in &out.events {
            if let TimelineEvent::End { t, .. } = e {
                s.end_t = Some(*t);
            }
        }
        if let Some(m) = s.meters.latest() {
            s.last_meters = m;
        }
        s.last_frame = frame;
        s.last_normalized = out.normalized.values;
        s.position = out.position;
        s.t_in_section = s.conductor.t_in_section();
        if let Some(g) = &self.gateway {
            g.publish(Outbound::Frame(frame));
            g.publish(Outbound::Fatigue(self.fatigue(s) as f32));
            for (i, v) in s.last_meters.as_array().into_iter().enumerate() {
                g.publish(Outbound::Meter(i, v));
            }
        }
        if let Some(q) = &s.chunks {
            while let Some(c) = q.pop() {
                s.audio.extend_from_slice(&c.data[..c.len]);
            }
        }
        s.seq += 1;
    }

    fn fatigue(&self, s: &Session) -> f64 {
        match self.opts.source {
            LiveSource::Sim => s.sim.body().fatigue,
            LiveSource::Osc => s.osc_fatigue,
        }
    }

    fn finish(&self, mut s: Session) -> Result<SessionRecord, RuntimeError> {
        let sr = self.scene.audio.sample_rate as f64;
        let rate = self.scene.sim.control_rate_hz;
        let end = match s.end_t {
            Some(t) => (t * sr).round() as u64,
            None => (s.seq as f64 * sr / rate).round() as u64,
        };
        s.shared.end_sample.store(end, Ordering::Release);
        let result = s.thread.take().expect("audio thread").join().map_err(|_| RuntimeError::Session("audio thread panicked".into()))?;
        if let Some(q) = &s.chunks {
            while let Some(c) = q.pop() {
                s.audio.extend_from_slice(&c.data[..c.len]);
            }
        }
        s.audio.truncate(end as usize);

        let log = SessionLog {
            frames: s.recorder.frames,
            events: s.recorder.events,
            meta: SessionMeta {
                format: SESSION_FORMAT,
                seed: s.seed,
                config_hash: self.scene.config_hash(),
                sample_rate: self.scene.audio.sample_rate,
                control_rate_hz: rate,
                block_size: self.scene.audio.block_size,
                samples: end,
                calibration: self.calibration,
                late_frames: result.late_blocks,
                keyframes: s.recorder.keyframes,
            },
        };
        if result.late_blocks > 0 {
            log::warn!("{} audio blocks missed their control tick; replay will differ", result.late_blocks);
        }
        if let Some(dir) = &self.opts.session_dir {
            let dir = numbered(dir, s.index);
            log.write_dir(&dir)?;
            log::info!("session written to {}", dir.display());
        }
        if let Some(path) = &self.opts.wav_out {
            let path = numbered(path, s.index);
            let bytes = encode_wav(&s.audio, self.scene.audio.sample_rate, self.scene.audio.wav_format, self.scene.audio.channels)?;
            std::fs::write(&path, bytes).map_err(|e| RuntimeError::io(&path, e))?;
        }
        Ok(SessionRecord {
            log,
            audio: (self.opts.keep_audio).then_some(s.audio),
            overruns: result.overruns,
        })
    }

    fn telemetry(&self, s: Option<&mut Session>, seed: u64) -> Telemetry {
        match s {
            Some(s) => Telemetry {
                v: SCHEMA_VERSION,
                t: s.last_frame.t,
                seq: s.last_frame.seq,
                pressures: s.last_frame.values,
                normalized: s.last_normalized,
                fatigue: self.fatigue(s),
                section: match s.position {
                    Position::In(id) => id.name().to_owned(),
                    Position::Ended => "ended".to_owned(),
                },
                t_in_section: s.t_in_section,
                meters: s.last_meters,
                transport: "running".into(),
                status: if s.degraded { "degraded" } else { "ok" }.into(),
                seed: s.seed,
                events: std::mem::take(&mut s.unsent_events),
            },
            None => Telemetry {
                v: SCHEMA_VERSION,
                t: 0.0,
                seq: 0,
                pressures: [0.0; PILLOWS],
                normalized: [0.0; PILLOWS],
                fatigue: 0.0,
                section: "idle".into(),
                t_in_section: 0.0,
                meters: Meters::default(),
                transport: "stopped".into(),
                status: "ok".into(),
                seed,
                events: vec![],
            },
        }
    }

    fn run(self) -> Result<PerformReport, RuntimeError> {
        let dt = Duration::from_secs_f64(self.scene.sim.dt());
        let telemetry_every = (self.scene.sim.control_rate_hz / TELEMETRY_HZ).round().max(1.0) as u64;
        let began = Instant::now();
        let mut next_tick = began;
        let mut report = PerformReport::default();
        let mut seed = self.opts.seed;
        let mut controls = BreathControls::from_config(&self.scene.sim.breath);
        let mut crush = [None; PILLOWS];
        let mut session = if self.opts.autostart { Some(self.start_session(0, seed, controls, crush)?) } else { None };
        if let Some(s) = &session {
            next_tick = s.started;
        }
        let mut started = usize::from(session.is_some());
        let mut loops = 0u64;
        let mut cues = Vec::new();

        loop {
            let mut transport = None;
            cues.clear();
            for cmd in self.cmd_rx.try_iter() {
                match cmd {
                    ConsoleCommand::SetBreath(b) => {
                        let c = BreathControls { depth: b.depth, rate: b.rate, zone_bias: b.zone_bias };
                        if let Some(s) = &mut session {
                            if let Err(e) = s.sim.set_controls(c) {
                                log::warn!("rejected breath controls: {e}");
                                continue;
                            }
                        }
                        controls = c;
                    }
                    ConsoleCommand::Crush(c) => {
                        crush = c;
                        if let Some(s) = &mut session {
                            s.sim.set_crush_override(c);
                        }
                    }
                    ConsoleCommand::Cue(c) => cues.push(c),
                    ConsoleCommand::Transport(t) => transport = Some(t),
                    ConsoleCommand::SetSeed(s) => seed = s,
                }
            }
            for ev in self.osc_rx.try_iter() {
                match ev {
                    ControlEvent::PressureReading { pillow, hpa } => {
                        if let Some(s) = &mut session {
                            if (1..=PILLOWS as u8).contains(&pillow) {
                                s.osc_values[pillow as usize - 1] = hpa as f64;
                                s.last_rx = Instant::now();
                                if s.degraded {
                                    s.degraded = false;
                                    let t = s.seq as f64 * self.scene.sim.dt();
                                    let e = SessionEvent::status(EventKind::StatusRecovered, t, s.seq, "pressure data resumed");
                                    s.recorder.events.push(e.clone());
                                    s.unsent_events.push(e);
                                }
                            }
                        }
                    }
                    ControlEvent::Fatigue(f) => {
                        if let Some(s) = &mut session {
                            s.osc_fatigue = f as f64;
                        }
                    }
                    ControlEvent::SectionCue(c) => cues.push(c),
                    ControlEvent::Transport(t) => transport = Some(t),
                }
            }

            match (transport, session.is_some()) {
                (Some(TransportCmd::Start), false) => {
                    let s = self.start_session(started, seed, controls, crush)?;
                    next_tick = s.started;
                    session = Some(s);
                    started += 1;
                }
                (Some(TransportCmd::Stop), true) => {
                    report.sessions.push(self.finish(session.take().expect("running"))?);
                }
                _ => {}
            }

            let stopping = self.stop.load(Ordering::SeqCst)
                || self.opts.max_duration_s.is_some_and(|d| began.elapsed().as_secs_f64() >= d);
            if let Some(s) = &mut session {
                if !stopping {
                    self.tick(s, &cues);
                }
            }
            if loops % telemetry_every == 0 {
                if let Some(b) = &self.bridge {
                    b.publish(&self.telemetry(session.as_mut(), seed));
                }
            }
            if session.as_ref().is_some_and(|s| s.end_t.is_some()) {
                if let Some(b) = &self.bridge {
                    b.publish(&self.telemetry(session.as_mut(), seed));
                }
                report.sessions.push(self.finish(session.take().expect("running"))?);
                if self.opts.exit_on_end {
                    break;
                }
            }
            if stopping {
                if let Some(s) = session.take() {
                    report.sessions.push(self.finish(s)?);
                }
                break;
            }

            loops += 1;
            next_tick += dt;
            let now = Instant::now();
            if next_tick > now {
                std::thread::sleep(next_tick - now);
            } else if now - next_tick > Duration::from_secs(1) {
                log::warn!("control loop fell {:.1} s behind; resynchronizing", (now - next_tick).as_secs_f64());
                next_tick = now;
            }
        }
        if let Some(g) = &self.gateway {
            report.osc_dropped = g.stats().dropped();
        }
        Ok(report)
    }
}

fn numbered(path: &Path, index: usize) -> PathBuf {
    if index == 0 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{}.{}", index + 1, ext.to_string_lossy()),
        None => format!("{stem}-{}", index + 1),
    };
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_sessions_get_suffixes() {
        assert_eq!(numbered(Path::new("out/take.wav"), 0), PathBuf::from("out/take.wav"));
        assert_eq!(numbered(Path::new("out/take.wav"), 2), PathBuf::from("out/take-3.wav"));
        assert_eq!(numbered(Path::new("out/session"), 1), PathBuf::from("out/session-2"));
    }
}
