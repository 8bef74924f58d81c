//! Session directories: `breath.csv`, `events.csv` and `meta.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::timeline::{AdvanceCause, TimelineEvent};
use super::RuntimeError;
use crate::breath::{read_track, write_track, PressureFrame};
use crate::mapping::{CalibrationMap, ParamFrame, SectionId};
use crate::osc::Cue;

pub const BREATH_FILE: &str = "breath.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const META_FILE: &str = "meta.json";
pub const SESSION_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Boundary,
    End,
    CueIgnored,
    StatusDegraded,
    StatusRecovered,
}

/// One row of `events.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub t: f64,
    /// Control tick at which the event took effect.
    pub seq: u64,
    pub kind: EventKind,
    pub from: Option<SectionId>,
    pub to: Option<SectionId>,
    pub detail: String,
}

impl SessionEvent {
    pub fn from_timeline(e: &TimelineEvent, seq: u64) -> Self {
        match e {
            TimelineEvent::Boundary { t, from, to, cause } => Self {
                t: *t,
                seq,
                kind: EventKind::Boundary,
                from: Some(*from),
                to: Some(*to),
                detail: match cause {
                    AdvanceCause::Timed => "timed".into(),
                    AdvanceCause::Cue => "cue".into(),
                },
            },
            TimelineEvent::End { t, from } => {
                Self { t: *t, seq, kind: EventKind::End, from: Some(*from), to: None, detail: String::new() }
            }
            TimelineEvent::CueIgnored { t, reason } => {
                Self { t: *t, seq, kind: EventKind::CueIgnored, from: None, to: None, detail: reason.clone() }
            }
        }
    }

    pub fn status(kind: EventKind, t: f64, seq: u64, detail: impl Into<String>) -> Self {
        Self { t, seq, kind, from: None, to: None, detail: detail.into() }
    }

    pub fn is_boundary(&self) -> bool {
        self.kind == EventKind::Boundary
    }
}

/// Decimated snapshot of the parameters sent to the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub seq: u64,
    pub t: f64,
    pub params: ParamFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub format: u32,
    pub seed: u64,
    pub config_hash: String,
    pub sample_rate: u32,
    pub control_rate_hz: f64,
    pub block_size: usize,
    /// Audio frames rendered.
    pub samples: u64,
    pub calibration: CalibrationMap,
    /// Parameter frames the audio side picked up after their scheduled block.
    #[serde(default)]
    pub late_frames: u64,
    pub keyframes: Vec<Keyframe>,
}

impl SessionMeta {
    pub fn duration_s(&self) -> f64 {
        self.samples as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub frames: Vec<PressureFrame>,
    pub events: Vec<SessionEvent>,
    pub meta: SessionMeta,
}

impl SessionLog {
    pub fn boundaries(&self) -> impl Iterator<Item = &SessionEvent> {
        self.events.iter().filter(|e| e.is_boundary())
    }

    /// Cues that moved the timeline, keyed by the tick they landed on. Feeding
    /// them back reproduces the run.
    pub fn replay_cues(&self) -> Vec<(u64, Cue)> {
        self.events
            .iter()
            .filter(|e| e.is_boundary() && e.detail == "cue")
            .filter_map(|e| e.to.map(|to| (e.seq, Cue::Goto(to))))
            .collect()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), RuntimeError> {
        std::fs::create_dir_all(dir).map_err(|e| RuntimeError::io(dir, e))?;
        let breath = dir.join(BREATH_FILE);
        let f = File::create(&breath).map_err(|e| RuntimeError::io(&breath, e))?;
        write_track(BufWriter::new(f), &self.frames)?;

        let events = dir.join(EVENTS_FILE);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&events)
            .map_err(|e| RuntimeError::Session(format!("{}: {e}", events.display())))?;
        for e in &self.events {
            w.serialize(e).map_err(|e| RuntimeError::Session(e.to_string()))?;
        }
        if self.events.is_empty() {
            w.write_record(["t", "seq", "kind", "from", "to", "detail"]).map_err(|e| RuntimeError::Session(e.to_string()))?;
        }
        w.flush().map_err(|e| RuntimeError::io(&events, e))?;

        let meta = dir.join(META_FILE);
        let f = File::create(&meta).map_err(|e| RuntimeError::io(&meta, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &self.meta).map_err(|e| RuntimeError::Session(e.to_string()))?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, RuntimeError> {
        let breath = dir.join(BREATH_FILE);
        let f = File::open(&breath).map_err(|e| RuntimeError::io(&breath, e))?;
        let frames = read_track(BufReader::new(f))?;

        let events_path = dir.join(EVENTS_FILE);
        let mut r = csv::Reader::from_path(&events_path).map_err(|e| RuntimeError::Session(format!("{}: {e}", events_path.display())))?;
        let events = r
            .deserialize()
            .collect::<Result<Vec<SessionEvent>, _>>()
            .map_err(|e| RuntimeError::Session(format!("{}: {e}", events_path.display())))?;

        let meta_path = dir.join(META_FILE);
        let f = File::open(&meta_path).map_err(|e| RuntimeError::io(&meta_path, e))?;
        let meta: SessionMeta = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| RuntimeError::Session(format!("{}: {e}", meta_path.display())))?;
        if meta.format != SESSION_FORMAT {
            return Err(RuntimeError::Session(format!("unsupported session format {}", meta.format)));
        }
        Ok(Self { frames, events, meta })
    }
}
