//! Orchestration: scenes, the section timeline, the control tick, offline
//! and live rendering, session logs, notation and the console bridge.

mod bridge;
mod conductor;
mod live;
mod notation;
mod render;
mod scene;
mod session;
mod timeline;

pub use bridge::{parse_command, BridgeHandle, ConsoleBridge, ConsoleCommand, Telemetry, TELEMETRY_HZ};
pub use conductor::{scene_calibration, simulate_track, track_calibration, Conductor, Recorder, TickOutput, KEYFRAME_EVERY};
pub use live::{perform, LiveOptions, LiveSource, PerformReport, Performance, SessionRecord, STARVATION_S};
pub use notation::{decimate, export_notation, load_for_notation, MAX_POINTS, RULE_COLOR};
pub use render::{
    calibrate_from_track, offline_render, render_session, tape_lines_for, LiveVoice, RenderInput, RenderOutput, Renderer,
};
pub use scene::{CalibrationPolicy, IoConfig, SceneConfig, TapeLineRef};
pub use session::{
    EventKind, Keyframe, SessionEvent, SessionLog, SessionMeta, BREATH_FILE, EVENTS_FILE, META_FILE, SESSION_FORMAT,
};
pub use timeline::{AdvanceCause, Position, Timeline, TimelineEvent};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::breath::SimError;
use crate::dsp::DspError;
use crate::mapping::MappingError;
use crate::osc::OscError;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scene field `{field}`: {constraint}")]
    Validation { field: String, constraint: String },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("missing asset: {}", .0.display())]
    MissingAsset(PathBuf),
    #[error("cannot read scene: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("breath track covers {available_s:.2} s but the scene needs {needed_s:.2} s")]
    TrackTooShort { needed_s: f64, available_s: f64 },
    #[error("empty log: no pressure frames")]
    EmptyLog,
    #[error("session: {0}")]
    Session(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Osc(#[from] OscError),
    #[error("console bridge: {0}")]
    Bridge(String),
}

impl RuntimeError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), message: e.to_string() }
    }
}
