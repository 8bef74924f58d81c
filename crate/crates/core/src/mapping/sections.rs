//! Section specs and their pressure-to-parameter mappings.
//!
//! Every curve is affine plus clamp, with an optional exponent applied to the
//! normalized pressure first.

use serde::{Deserialize, Serialize};

use super::calibrate::NormalizedPressures;
use super::params::{
    GrainParams, ParamFrame, SectionId, TapeLineParams, VoiceParams, CHOIR_VOICES, MAX_TAPE_LINES, RATE_RANGE,
    SIZE_MS_RANGE, SPEED_RANGE,
};
use super::MappingError;
use crate::breath::PILLOWS;

/// How a section hands over to the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvancePolicy {
    /// Performer cue, with the duration as a fallback.
    #[default]
    CueOrTimed,
    Timed,
    /// Cue only; the duration is used by offline renders.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    #[serde(flatten)]
    pub mapping: SectionMapping,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub advance: AdvancePolicy,
}

fn default_duration() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum SectionMapping {
    Connection(ConnectionMapping),
    Disconnection(DisconnectionMapping),
    Questioning(QuestioningMapping),
}

impl SectionMapping {
    pub fn id(&self) -> SectionId {
        match self {
            SectionMapping::Connection(_) => SectionId::Connection,
            SectionMapping::Disconnection(_) => SectionId::Disconnection,
            SectionMapping::Questioning(_) => SectionId::Questioning,
        }
    }
}

/// Tape lines enter one by one while the pillows gain control over their
/// playback rate and volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectionMapping {
    /// Entry time of each tape line, seconds into the section.
    pub intro_times_s: Vec<f64>,
    /// Time for the control weight to ramp from 0 to 1; defaults to the
    /// section duration.
    pub control_ramp_s: Option<f64>,
    /// Per-pillow weights of the aggregate breath level.
    pub zone_weights: [f64; PILLOWS],
    pub rate_span: f64,
    pub base_gain: f64,
    pub gain_span: f64,
    pub breath_amp: f64,
    pub curve: f64,
}

impl Default for ConnectionMapping {
    fn default() -> Self {
        Self {
            intro_times_s: vec![2.0, 12.0, 24.0, 36.0],
            control_ramp_s: None,
            zone_weights: [0.25; PILLOWS],
            rate_span: 1.0,
            base_gain: 0.3,
            gain_span: 0.7,
            breath_amp: 0.8,
            curve: 1.0,
        }
    }
}

/// Each pillow drives its own choir voice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisconnectionMapping {
    /// `assignment[pillow] = voice`; must be a bijection.
    pub assignment: [usize; PILLOWS],
    pub transpose_base_st: f64,
    pub transpose_range_st: f64,
    /// Snap transposition to whole semitones.
    pub quantize: bool,
    pub delay_range_ms: f64,
    pub variation_range: f64,
    /// Voices stay silent below this normalized pressure.
    pub threshold: f64,
    pub curve: f64,
}

impl Default for DisconnectionMapping {
    fn default() -> Self {
        Self {
            assignment: [0, 1, 2, 3],
            transpose_base_st: -12.0,
            transpose_range_st: 24.0,
            quantize: true,
            delay_range_ms: 250.0,
            variation_range: 1.0,
            threshold: 0.15,
            curve: 1.0,
        }
    }
}

/// Which pillow controls which grain parameter; must use each pillow once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrainAssignment {
    pub size: usize,
    pub position: usize,
    pub speed: usize,
    pub density: usize,
}

impl Default for GrainAssignment {
    fn default() -> Self {
        Self { size: 3, position: 2, speed: 1, density: 0 }
    }
}

impl GrainAssignment {
    pub fn as_array(&self) -> [usize; 4] {
        [self.size, self.position, self.speed, self.density]
    }
}

/// Pillow pressure steers the granular engine directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestioningMapping {
    pub assignment: GrainAssignment,
    pub size_ms: [f64; 2],
    pub speed: [f64; 2],
    pub density_hz: [f64; 2],
    pub gain: f64,
    pub curve: f64,
}

impl Default for QuestioningMapping {
    fn default() -> Self {
        Self {
            assignment: GrainAssignment::default(),
            size_ms: [10.0, 500.0],
            speed: [0.25, 4.0],
            density_hz: [2.0, 80.0],
            gain: 0.8,
            curve: 1.0,
        }
    }
}

impl SectionSpec {
    pub fn new(mapping: SectionMapping, duration_s: f64) -> Self {
        Self { mapping, duration_s, advance: AdvancePolicy::default() }
    }

    pub fn id(&self) -> SectionId {
        self.mapping.id()
    }

    /// The default three-section layout.
    pub fn default_sections() -> Vec<SectionSpec> {
        vec![
            SectionSpec::new(SectionMapping::Connection(ConnectionMapping::default()), 60.0),
            SectionSpec::new(SectionMapping::Disconnection(DisconnectionMapping::default()), 60.0),
            SectionSpec::new(SectionMapping::Questioning(QuestioningMapping::default()), 60.0),
        ]
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let id = self.id();
        let check = |ok: bool, field: &str, constraint: &str| {
            if ok {
                Ok(())
            } else {
                Err(MappingError::InvalidParameter {
                    field: format!("{id}.{field}"),
                    constraint: constraint.to_owned(),
                })
            }
        };
        check(self.duration_s.is_finite() && self.duration_s > 0.0, "duration_s", "must be > 0")?;
        match &self.mapping {
            SectionMapping::Connection(m) => {
                check(m.intro_times_s.len() <= MAX_TAPE_LINES, "intro_times_s", "at most 8 tape lines")?;
                check(
                    m.intro_times_s.iter().all(|t| t.is_finite() && *t >= 0.0)
                        && m.intro_times_s.windows(2).all(|w| w[0] <= w[1]),
                    "intro_times_s",
                    "non-negative and nondecreasing",
                )?;
                check(m.control_ramp_s.is_none_or(|r| r > 0.0), "control_ramp_s", "must be > 0")?;
                check(
                    m.zone_weights.iter().all(|w| *w >= 0.0) && (m.zone_weights.iter().sum::<f64>() - 1.0).abs() < 1e-6,
                    "zone_weights",
                    "non-negative and summing to 1",
                )?;
                check(m.rate_span >= 0.0, "rate_span", "must be >= 0")?;
                check(m.gain_span >= 0.0 && (0.0..=1.0).contains(&m.base_gain), "gain", "base in [0,1], span >= 0")?;
                check((0.0..=1.0).contains(&m.breath_amp), "breath_amp", "in [0, 1]")?;
                check(m.curve > 0.0, "curve", "must be > 0")?;
            }
            SectionMapping::Disconnection(m) => {
                if !is_bijection(&m.assignment) {
                    return Err(MappingError::InvalidAssignment(format!(
                        "disconnection assignment {:?} must map the 4 pillows onto the 4 voices one-to-one",
                        m.assignment
                    )));
                }
                check(m.transpose_range_st >= 0.0, "transpose_range_st", "must be >= 0")?;
                check(m.delay_range_ms >= 0.0 && m.delay_range_ms <= 250.0, "delay_range_ms", "in [0, 250]")?;
                check((0.0..=1.0).contains(&m.variation_range), "variation_range", "in [0, 1]")?;
                check((0.0..1.0).contains(&m.threshold), "threshold", "in [0, 1)")?;
                check(m.curve > 0.0, "curve", "must be > 0")?;
            }
            SectionMapping::Questioning(m) => {
                if !is_bijection(&m.assignment.as_array()) {
                    return Err(MappingError::InvalidAssignment(format!(
                        "questioning assignment {:?} must use each pillow once",
                        m.assignment
                    )));
                }
                let inside = |r: [f64; 2], (lo, hi): (f32, f32)| lo as f64 <= r[0] && r[0] <= r[1] && r[1] <= hi as f64;
                check(inside(m.size_ms, SIZE_MS_RANGE), "size_ms", "ordered within [10, 500]")?;
                check(inside(m.speed, SPEED_RANGE), "speed", "ordered within [0.25, 4]")?;
                check(m.density_hz[0] >= 0.0 && m.density_hz[0] <= m.density_hz[1], "density_hz", "ordered, >= 0")?;
                check((0.0..=1.0).contains(&m.gain), "gain", "in [0, 1]")?;
                check(m.curve > 0.0, "curve", "must be > 0")?;
            }
        }
        Ok(())
    }
}

fn is_bijection(map: &[usize; 4]) -> bool {
    let mut seen = [false; 4];
    map.iter().all(|&v| v < 4 && !std::mem::replace(&mut seen[v], true))
}

fn shaped(v: f64, curve: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if curve == 1.0 {
        v
    } else {
        v.powf(curve)
    }
}

fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    lo + (hi - lo) * t
}

fn mismatch(expected: SectionId, spec: &SectionSpec) -> MappingError {
    MappingError::SectionMismatch { expected, found: spec.id() }
}

/// Tape lines: line k plays once `t >= intro_k`. The control weight `w`
/// ramps 0→1 across the section; with breath level `b`,
/// `rate = 1 + w (b - 0.5) rate_span` and
/// `gain = clamp(base_gain + w b gain_span)`.
pub fn eval_connection(
    spec: &SectionSpec,
    np: &NormalizedPressures,
    t_in_section: f64,
) -> Result<ParamFrame, MappingError> {
    let SectionMapping::Connection(m) = &spec.mapping else {
        return Err(mismatch(SectionId::Connection, spec));
    };
    let ramp = m.control_ramp_s.unwrap_or(spec.duration_s);
    let w = (t_in_section / ramp).clamp(0.0, 1.0);
    let b: f64 = m
        .zone_weights
        .iter()
        .zip(&np.values)
        .map(|(zw, v)| zw * shaped(*v, m.curve))
        .sum::<f64>()
        .clamp(0.0, 1.0);

    let mut frame = ParamFrame::neutral(SectionId::Connection);
    let rate = (1.0 + w * (b - 0.5) * m.rate_span).clamp(RATE_RANGE.0 as f64, RATE_RANGE.1 as f64);
    let gain = (m.base_gain + w * b * m.gain_span).clamp(0.0, 1.0);
    for (line, &intro) in frame.tape.iter_mut().zip(&m.intro_times_s) {
        if t_in_section >= intro {
            *line = TapeLineParams { active: true, rate: rate as f32, gain: gain as f32 };
        }
    }
    frame.live_breath_gain = (m.breath_amp * b).clamp(0.0, 1.0) as f32;
    Ok(frame)
}

/// One pillow, one voice: pillow i sets transposition, delay, variation and
/// gated gain of voice `assignment[i]` and nothing else.
pub fn eval_disconnection(spec: &SectionSpec, np: &NormalizedPressures) -> Result<ParamFrame, MappingError> {
    let SectionMapping::Disconnection(m) = &spec.mapping else {
        return Err(mismatch(SectionId::Disconnection, spec));
    };
    if !is_bijection(&m.assignment) {
        return Err(MappingError::InvalidAssignment(format!("{:?}", m.assignment)));
    }
    let mut frame = ParamFrame::neutral(SectionId::Disconnection);
    for (pillow, &raw) in np.values.iter().enumerate() {
        let v = shaped(raw, m.curve);
        let mut transpose = m.transpose_base_st + v * m.transpose_range_st;
        if m.quantize {
            transpose = transpose.round();
        }
        let gain = if v < m.threshold || v == 0.0 { 0.0 } else { ((v - m.threshold) / (1.0 - m.threshold)).clamp(0.0, 1.0) };
        frame.choir[m.assignment[pillow]] = VoiceParams {
            transpose_semitones: transpose as f32,
            delay_ms: (v * m.delay_range_ms) as f32,
            variation: (v * m.variation_range).clamp(0.0, 1.0) as f32,
            gain: gain as f32,
        };
    }
    debug_assert_eq!(frame.choir.len(), CHOIR_VOICES);
    Ok(frame)
}

/// Grain size, position, speed and density each follow one pillow.
pub fn eval_questioning(spec: &SectionSpec, np: &NormalizedPressures) -> Result<ParamFrame, MappingError> {
    let SectionMapping::Questioning(m) = &spec.mapping else {
        return Err(mismatch(SectionId::Questioning, spec));
    };
    let a = &m.assignment;
    let v = |pillow: usize| shaped(np.values[pillow], m.curve);
    let mut frame = ParamFrame::neutral(SectionId::Questioning);
    frame.grain = GrainParams {
        size_ms: lerp(m.size_ms[0], m.size_ms[1], v(a.size)) as f32,
        position: v(a.position) as f32,
        speed: lerp(m.speed[0], m.speed[1], v(a.speed)) as f32,
        density_hz: lerp(m.density_hz[0], m.density_hz[1], v(a.density)) as f32,
        gain: m.gain as f32,
    };
    Ok(frame)
}

/// Dispatches to the evaluator for the spec's section. Pure.
pub fn evaluate(spec: &SectionSpec, np: &NormalizedPressures, t_in_section: f64) -> Result<ParamFrame, MappingError> {
    match spec.id() {
        SectionId::Connection => eval_connection(spec, np, t_in_section),
        SectionId::Disconnection => eval_disconnection(spec, np),
        SectionId::Questioning => eval_questioning(spec, np),
    }
}
