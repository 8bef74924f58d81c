//! Block scheduling shared by offline renders and live performance.
//!
//! Control tick `k` lands on audio sample `round(k · sample_rate /
//! control_rate)`. A block picks up every tick due at or before its first
//! sample. Both paths use this rule, so a live session and an offline
//! render of its log produce the same samples.

use super::conductor::{track_calibration, Conductor, Recorder};
use super::scene::SceneConfig;
use super::session::{SessionLog, SessionMeta, SESSION_FORMAT};
use super::{scene_calibration, RuntimeError};
use crate::breath::{BreathMode, PressureFrame};
use crate::dsp::{encode_wav, placeholder_line, AudioBuffer, BlockReport, Engine, SyntheticVoice, TapeLine};
use crate::mapping::{CalibrationMap, ParamFrame, SectionId};
use crate::osc::Cue;

const MAX_BLOCK: usize = 256;

/// What feeds the choir, the grain capture and the live bus.
#[derive(Debug, Clone)]
pub enum LiveVoice {
    Synthetic { voice: SyntheticVoice, mode: BreathMode },
    /// A looping WAV.
    Recorded { samples: Vec<f32>, pos: usize },
}

impl LiveVoice {
    pub fn for_scene(scene: &SceneConfig, seed: u64) -> Result<Self, RuntimeError> {
        let sr = scene.audio.sample_rate;
        match &scene.live_input {
            Some(path) => {
                let samples = AudioBuffer::read_wav(path)?.resampled(sr)?.into_samples();
                if samples.is_empty() {
                    return Err(RuntimeError::Session(format!("{}: empty live input", path.display())));
                }
                Ok(Self::Recorded { samples, pos: 0 })
            }
            None => Ok(Self::Synthetic { voice: SyntheticVoice::new(sr, seed, scene.voice_f0_hz), mode: scene.sim.breath.mode }),
        }
    }

    pub fn fill(&mut self, frame: &ParamFrame, out: &mut [f32]) {
        match self {
            Self::Synthetic { voice, mode } => voice.render(frame.breath_level, *mode, out),
            Self::Recorded { samples, pos } => {
                for o in out {
                    *o = samples[*pos];
                    *pos = (*pos + 1) % samples.len();
                }
            }
        }
    }
}

/// The scene's tape lines, or four synthetic placeholders.
pub fn tape_lines_for(scene: &SceneConfig) -> Result<Vec<TapeLine>, RuntimeError> {
    let sr = scene.audio.sample_rate;
    if scene.tape_lines.is_empty() {
        return (0..4)
            .map(|k| Ok(TapeLine { buffer: AudioBuffer::new(placeholder_line(k, sr), sr)?, looping: true }))
            .collect();
    }
    scene
        .tape_lines
        .iter()
        .map(|l| Ok(TapeLine { buffer: AudioBuffer::read_wav(&l.path)?, looping: l.looping }))
        .collect()
}

/// Engine plus tick scheduling. Allocation-free per block.
pub struct Renderer {
    engine: Engine,
    voice: LiveVoice,
    current: ParamFrame,
    current_seq: Option<u64>,
    pending: Option<(u64, ParamFrame)>,
    position: u64,
    sample_rate: f64,
    control_rate: f64,
    live: [f32; MAX_BLOCK],
    late_blocks: u64,
}

impl Renderer {
    pub fn new(scene: &SceneConfig, seed: u64) -> Result<Self, RuntimeError> {
        Ok(Self {
            engine: Engine::new(&scene.audio, tape_lines_for(scene)?, seed)?,
            voice: LiveVoice::for_scene(scene, seed)?,
            current: ParamFrame::neutral(SectionId::Connection),
            current_seq: None,
            pending: None,
            position: 0,
            sample_rate: scene.audio.sample_rate as f64,
            control_rate: scene.sim.control_rate_hz,
            live: [0.0; MAX_BLOCK],
            late_blocks: 0,
        })
    }

    pub fn tick_sample(&self, seq: u64) -> u64 {
        (seq as f64 * self.sample_rate / self.control_rate).round() as u64
    }

    /// Samples rendered so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Blocks that started before the tick they needed had arrived.
    pub fn late_blocks(&self) -> u64 {
        self.late_blocks
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn current(&self) -> &ParamFrame {
        &self.current
    }

    /// Renders one block of `out.len()` samples, pulling `(seq, frame)`
    /// pairs from `next` until one is not yet due.
    pub fn render_block(&mut self, mut next: impl FnMut() -> Option<(u64, ParamFrame)>, out: &mut [f32]) -> BlockReport {
        loop {
            if self.pending.is_none() {
                self.pending = next();
            }
            match self.pending {
                Some((seq, frame)) if self.tick_sample(seq) <= self.position => {
                    self.current = frame;
                    self.current_seq = Some(seq);
                    self.pending = None;
                }
                _ => break,
            }
        }
        if self.pending.is_none() {
            let due = (self.position as f64 * self.control_rate / self.sample_rate).floor() as u64;
            if self.current_seq.is_none_or(|s| s < due) {
                self.late_blocks += 1;
            }
        }
        let n = out.len();
        self.voice.fill(&self.current, &mut self.live[..n]);
        let report = self.engine.render_block(&self.current, Some(&self.live[..n]), out).expect("block size validated with the scene");
        self.position += n as u64;
        report
    }
}

/// Everything an offline render consumes besides the scene.
#[derive(Debug, Clone, Copy)]
pub struct RenderInput<'a> {
    pub frames: &'a [PressureFrame],
    /// `(tick, cue)` pairs applied on that tick.
    pub cues: &'a [(u64, Cue)],
    pub seed: u64,
    /// Output length; the scene's total duration when `None`.
    pub samples: Option<u64>,
    /// The scene calibration when `None`.
    pub calibration: Option<CalibrationMap>,
    /// Manual sections advance on their nominal duration.
    pub all_timed: bool,
}

impl<'a> RenderInput<'a> {
    pub fn new(frames: &'a [PressureFrame], seed: u64) -> Self {
        Self { frames, cues: &[], seed, samples: None, calibration: None, all_timed: true }
    }

    /// Replays a recorded session: its breath, cues, seed, length and
    /// calibration.
    pub fn replay(log: &'a SessionLog, cues: &'a [(u64, Cue)]) -> Self {
        Self {
            frames: &log.frames,
            cues,
            seed: log.meta.seed,
            samples: Some(log.meta.samples),
            calibration: Some(log.meta.calibration),
            all_timed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub audio: Vec<f32>,
    pub wav: Vec<u8>,
    pub log: SessionLog,
}

/// Deterministic full render: same scene, input and seed give the same WAV
/// bytes.
pub fn offline_render(scene: &SceneConfig, input: RenderInput<'_>) -> Result<RenderOutput, RuntimeError> {
    let sr = scene.audio.sample_rate;
    let total = input.samples.unwrap_or((scene.total_duration_s() * sr as f64).round() as u64);
    let calibration = match input.calibration {
        Some(c) => c,
        None => scene_calibration(scene)?,
    };
    let mut renderer = Renderer::new(scene, input.seed)?;
    let mut needed = 0u64;
    while renderer.tick_sample(needed) < total {
        needed += 1;
    }
    if (input.frames.len() as u64) < needed {
        let rate = scene.sim.control_rate_hz;
        return Err(RuntimeError::TrackTooShort {
            needed_s: needed as f64 / rate,
            available_s: input.frames.len() as f64 / rate,
        });
    }

    let mut conductor = Conductor::new(scene, calibration, input.all_timed)?;
    let mut recorder = Recorder::default();
    let mut seq = 0u64;
    let mut cue_buf: Vec<Cue> = Vec::new();
    let mut next = || {
        if seq >= needed {
            return None;
        }
        let frame = &input.frames[seq as usize];
        cue_buf.clear();
        cue_buf.extend(input.cues.iter().filter(|(k, _)| *k == seq).map(|(_, c)| *c));
        let out = conductor.tick(frame, seq, &cue_buf);
        recorder.record(seq, frame, &out);
        seq += 1;
        Some((seq - 1, out.params))
    };

    let block = scene.audio.block_size;
    let mut audio = Vec::with_capacity(total as usize + block);
    let mut buf = vec![0.0f32; block];
    while (audio.len() as u64) < total {
        renderer.render_block(&mut next, &mut buf);
        audio.extend_from_slice(&buf);
    }
    audio.truncate(total as usize);
    drop(next);

    let wav = encode_wav(&audio, sr, scene.audio.wav_format, scene.audio.channels)?;
    let log = SessionLog {
        frames: recorder.frames,
        events: recorder.events,
        meta: SessionMeta {
            format: SESSION_FORMAT,
            seed: input.seed,
            config_hash: scene.config_hash(),
            sample_rate: sr,
            control_rate_hz: scene.sim.control_rate_hz,
            block_size: block,
            samples: total,
            calibration,
            late_frames: 0,
            keyframes: recorder.keyframes,
        },
    };
    Ok(RenderOutput { audio, wav, log })
}

/// Replays `log` through [`offline_render`].
pub fn render_session(scene: &SceneConfig, log: &SessionLog) -> Result<RenderOutput, RuntimeError> {
    let cues = log.replay_cues();
    offline_render(scene, RenderInput::replay(log, &cues))
}

/// Calibration from a track instead of a sweep, for `calibrate --breath`.
pub fn calibrate_from_track(scene: &SceneConfig, frames: &[PressureFrame]) -> Result<CalibrationMap, RuntimeError> {
    track_calibration(scene, frames)
}
