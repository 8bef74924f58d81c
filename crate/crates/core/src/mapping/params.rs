use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three sections of the piece, always performed in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionId {
    Connection,
    Disconnection,
    Questioning,
}

impl SectionId {
    pub const ALL: [SectionId; 3] = [SectionId::Connection, SectionId::Disconnection, SectionId::Questioning];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based section number as used on the wire.
    pub fn from_number(n: i32) -> Option<Self> {
        match n {
            1 => Some(Self::Connection),
            2 => Some(Self::Disconnection),
            3 => Some(Self::Questioning),
            _ => None,
        }
    }

    pub fn next(self) -> Option<Self> {
        Self::ALL.get(self.index() + 1).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Connection => "connection",
            Self::Disconnection => "disconnection",
            Self::Questioning => "questioning",
        }
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SectionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown section `{s}`"))
    }
}

pub const MAX_TAPE_LINES: usize = 8;
pub const CHOIR_VOICES: usize = 4;

pub const RATE_RANGE: (f32, f32) = (0.25, 4.0);
pub const SIZE_MS_RANGE: (f32, f32) = (10.0, 500.0);
pub const SPEED_RANGE: (f32, f32) = (0.25, 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapeLineParams {
    pub active: bool,
    pub rate: f32,
    pub gain: f32,
}

impl TapeLineParams {
    pub const NEUTRAL: Self = Self { active: false, rate: 1.0, gain: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoiceParams {
    pub transpose_semitones: f32,
    pub delay_ms: f32,
    /// Depth of the random pitch/delay wander, 0..1.
    pub variation: f32,
    pub gain: f32,
}

impl VoiceParams {
    pub const NEUTRAL: Self = Self { transpose_semitones: 0.0, delay_ms: 0.0, variation: 0.0, gain: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrainParams {
    pub size_ms: f32,
    pub position: f32,
    pub speed: f32,
    pub density_hz: f32,
    pub gain: f32,
}

impl GrainParams {
    pub const NEUTRAL: Self = Self { size_ms: SIZE_MS_RANGE.0, position: 0.0, speed: 1.0, density_hz: 0.0, gain: 0.0 };
}

/// Every synthesis parameter for one control tick.
///
/// Field groups outside the active section sit at neutral values: rates 1,
/// gains 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamFrame {
    pub section: SectionId,
    pub tape: [TapeLineParams; MAX_TAPE_LINES],
    pub choir: [VoiceParams; CHOIR_VOICES],
    pub grain: GrainParams,
    pub live_breath_gain: f32,
    /// Mean normalized pressure 0..1; drives the synthetic voice when no live
    /// input is wired. Set by the control loop, not by the section mappings.
    pub breath_level: f32,
}

impl ParamFrame {
    pub fn neutral(section: SectionId) -> Self {
        Self {
            section,
            tape: [TapeLineParams::NEUTRAL; MAX_TAPE_LINES],
            choir: [VoiceParams::NEUTRAL; CHOIR_VOICES],
            grain: GrainParams::NEUTRAL,
            live_breath_gain: 0.0,
            breath_level: 0.0,
        }
    }

    /// Checks the range invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, v: f32| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} outside [0, 1]"))
            }
        };
        let within = |name: &str, v: f32, (lo, hi): (f32, f32)| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} outside [{lo}, {hi}]"))
            }
        };
        for (k, line) in self.tape.iter().enumerate() {
            within(&format!("tape[{k}].rate"), line.rate, RATE_RANGE)?;
            unit(&format!("tape[{k}].gain"), line.gain)?;
        }
        for (v, voice) in self.choir.iter().enumerate() {
            unit(&format!("choir[{v}].gain"), voice.gain)?;
            unit(&format!("choir[{v}].variation"), voice.variation)?;
            if !(voice.delay_ms >= 0.0 && voice.transpose_semitones.is_finite()) {
                return Err(format!("choir[{v}] has invalid delay/transpose"));
            }
        }
        within("grain.size_ms", self.grain.size_ms, SIZE_MS_RANGE)?;
        within("grain.speed", self.grain.speed, SPEED_RANGE)?;
        unit("grain.position", self.grain.position)?;
        unit("grain.gain", self.grain.gain)?;
        if !(self.grain.density_hz >= 0.0 && self.grain.density_hz.is_finite()) {
            return Err(format!("grain.density_hz = {} invalid", self.grain.density_hz));
        }
        unit("live_breath_gain", self.live_breath_gain)?;
        unit("breath_level", self.breath_level)
    }
}
